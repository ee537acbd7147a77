#include "kvchaos/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kvchaos/quadrature.hpp"

namespace kvchaos {

namespace {

constexpr double kPi = std::numbers::pi;
// Image terms whose Gaussian exponent exceeds this are dropped (exp(-45) ~ 3e-20).
constexpr double kImageExponentCut = 45.0;
// Eigen terms are dropped once exp(-(k^2-1) lambda_1 t) < exp(-39) ~ 1e-17.
constexpr double kEigenExponentCut = 39.0;

std::string format_value(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

BoundaryWeight::BoundaryWeight(double rho) : rho_(rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("boundary weight must lie in (0,1), got " + format_value(rho));
  }
}

ConfigError::ConfigError(std::string field, const std::string& message)
    : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}

// ---------------------------------------------------------------------------
// DomainModel

double DomainModel::distance_to_boundary(double v) const {
  return std::min(v - lower(), upper() - v);
}

void DomainModel::require_interior(double v, const char* what) const {
  if (!is_interior(v)) {
    throw std::domain_error(std::string(what) + ": point " + format_value(v) + " is not interior");
  }
}

void DomainModel::require_closed(double v, const char* what) const {
  if (!(v >= lower() && v <= upper())) {
    throw std::domain_error(std::string(what) + ": point " + format_value(v) + " is outside the domain");
  }
}

void DomainModel::require_positive_time(double t, const char* what) {
  if (!(t > 0.0)) throw std::domain_error(std::string(what) + ": time must be positive");
}

double DomainModel::grad_log_beta(double v) const {
  require_interior(v, "grad_log_beta");
  return beta_grad(v) / beta(v);
}

double DomainModel::alpha(double s, double v) const {
  require_positive_time(s, "alpha");
  require_interior(v, "alpha");
  return tilted_survival(s, v).value / beta(v);
}

double DomainModel::grad_log_alpha(double s, double v) const {
  require_positive_time(s, "grad_log_alpha");
  require_interior(v, "grad_log_alpha");
  const ValueGrad a = tilted_survival(s, v);
  return a.grad / a.value - beta_grad(v) / beta(v);
}

// ---------------------------------------------------------------------------
// IntervalDomain

IntervalDomain::IntervalDomain(double a, double b, BoundaryWeight rho_a, BoundaryWeight rho_b,
                               int series_terms, double switch_time)
    : a_(a), b_(b), length_(b - a), rho_a_(rho_a.value()), rho_b_(rho_b.value()),
      series_terms_(series_terms), switch_time_(switch_time) {
  if (!(a < b)) throw std::invalid_argument("interval: need a < b");
  if (series_terms < 1) throw std::invalid_argument("interval: series_terms must be >= 1");
  if (switch_time_ <= 0.0) switch_time_ = length_ * length_ / (kPi * kPi);
}

double IntervalDomain::beta(double v) const {
  require_closed(v, "beta");
  return rho_a_ + (rho_b_ - rho_a_) * (v - a_) / length_;
}

double IntervalDomain::beta_grad(double v) const {
  require_closed(v, "beta_grad");
  return (rho_b_ - rho_a_) / length_;
}

double IntervalDomain::beta_hessian(double v) const {
  require_closed(v, "beta_hessian");
  return 0.0;
}

double IntervalDomain::principal_eigenvalue() const {
  return 0.5 * kPi * kPi / (length_ * length_);
}

int IntervalDomain::image_count(double t) const {
  const int k = 1 + static_cast<int>(std::ceil(std::sqrt(2.0 * kImageExponentCut * t) / (2.0 * length_)));
  return std::min(k, series_terms_);
}

int IntervalDomain::eigen_count(double t) const {
  const double c = principal_eigenvalue() * t;
  const int k = static_cast<int>(std::ceil(std::sqrt(1.0 + kEigenExponentCut / c)));
  return std::clamp(k, 1, series_terms_);
}

ValueGrad IntervalDomain::kernel_images(double t, double x, double y) const {
  const double X = x - a_;
  const double Y = y - a_;
  const double cut = 2.0 * kImageExponentCut * t;
  const int K = image_count(t);
  ValueGrad out;
  for (int n = -K; n <= K; ++n) {
    const double shift = 2.0 * n * length_;
    const double z1 = X - Y + shift;
    const double z2 = X + Y + shift;
    if (z1 * z1 < cut) {
      const double g = gaussian_density(z1, t);
      out.value += g;
      out.grad -= z1 / t * g;
    }
    if (z2 * z2 < cut) {
      const double g = gaussian_density(z2, t);
      out.value -= g;
      out.grad += z2 / t * g;
    }
  }
  return out;
}

ValueGrad IntervalDomain::kernel_eigen(double t, double x, double y) const {
  const int K = eigen_count(t);
  const double c = principal_eigenvalue() * t;
  const double tx = kPi * (x - a_) / length_;
  const double ty = kPi * (y - a_) / length_;
  const double sx1 = std::sin(tx), cx1 = std::cos(tx);
  const double sy1 = std::sin(ty), cy1 = std::cos(ty);
  double sx = sx1, cx = cx1, sy = sy1, cy = cy1;
  double e = std::exp(-c);
  double ratio = std::exp(-3.0 * c);
  const double ratio_step = std::exp(-2.0 * c);
  double sum_v = 0.0, sum_g = 0.0;
  for (int k = 1; k <= K; ++k) {
    sum_v += e * sx * sy;
    sum_g += e * k * cx * sy;
    // Rotate (cos k theta, sin k theta) -> (k+1) theta.
    const double nsx = sx * cx1 + cx * sx1;
    const double ncx = cx * cx1 - sx * sx1;
    const double nsy = sy * cy1 + cy * sy1;
    const double ncy = cy * cy1 - sy * sy1;
    sx = nsx; cx = ncx; sy = nsy; cy = ncy;
    e *= ratio;
    ratio *= ratio_step;
  }
  const double scale = 2.0 / length_;
  return {scale * sum_v, scale * (kPi / length_) * sum_g};
}

ValueGrad IntervalDomain::killed_kernel_dx(double t, double x, double y) const {
  require_positive_time(t, "killed_kernel");
  require_interior(x, "killed_kernel");
  require_interior(y, "killed_kernel");
  return t < switch_time_ ? kernel_images(t, x, y) : kernel_eigen(t, x, y);
}

ValueGrad IntervalDomain::survival_images(double s, double v) const {
  // beta(y) = c0 + c1 (y - a). Each image contributes a Gaussian in Y = y - a
  // centered at mu, integrated over [0, L]:
  //   M0(mu) = \int g(Y - mu) dY,   M1(mu) = \int Y g(Y - mu) dY
  //   M0' = g(mu) - g(L - mu),      M1' = M0 - L g(L - mu).
  const double c0 = rho_a_;
  const double c1 = (rho_b_ - rho_a_) / length_;
  const double L = length_;
  const double X = v - a_;
  const double sigma = std::sqrt(s);
  const double reach = 10.0 * sigma;
  const int K = image_count(s);
  ValueGrad out;
  auto add = [&](double mu, double sign, double dmu) {
    if (mu < -reach || mu > L + reach) return;
    const double m0 = normal_mass(-mu / sigma, (L - mu) / sigma);
    const double g0 = gaussian_density(mu, s);
    const double gL = gaussian_density(L - mu, s);
    const double m1 = mu * m0 + s * (g0 - gL);
    const double dm0 = g0 - gL;
    const double dm1 = m0 - L * gL;
    out.value += sign * (c0 * m0 + c1 * m1);
    out.grad += sign * dmu * (c0 * dm0 + c1 * dm1);
  };
  for (int n = -K; n <= K; ++n) {
    const double shift = 2.0 * n * L;
    add(X + shift, 1.0, 1.0);
    add(-X - shift, -1.0, -1.0);
  }
  return out;
}

ValueGrad IntervalDomain::survival_eigen_scaled(double s, double v) const {
  // (2/L) \int_0^L sin(k pi Y/L)(c0 + c1 Y) dY = 2 c0 (1-(-1)^k)/(k pi) + 2 c1 L (-1)^{k+1}/(k pi)
  const double c0 = rho_a_;
  const double c1 = (rho_b_ - rho_a_) / length_;
  const int K = eigen_count(s);
  const double c = principal_eigenvalue() * s;
  const double th = kPi * (v - a_) / length_;
  const double s1 = std::sin(th), co1 = std::cos(th);
  double sk = s1, ck = co1;
  double e = 1.0;
  double ratio = std::exp(-3.0 * c);
  const double ratio_step = std::exp(-2.0 * c);
  double sum_v = 0.0, sum_g = 0.0;
  for (int k = 1; k <= K; ++k) {
    const double odd = (k % 2 == 1) ? 1.0 : -1.0;  // (-1)^{k+1}
    const double coef = (2.0 * c0 * (1.0 + odd) + 2.0 * c1 * length_ * odd) / (k * kPi);
    sum_v += e * coef * sk;
    sum_g += e * coef * (k * kPi / length_) * ck;
    const double nsk = sk * co1 + ck * s1;
    const double nck = ck * co1 - sk * s1;
    sk = nsk;
    ck = nck;
    e *= ratio;
    ratio *= ratio_step;
  }
  return {sum_v, sum_g};
}

ValueGrad IntervalDomain::survival_eigen(double s, double v) const {
  const ValueGrad scaled = survival_eigen_scaled(s, v);
  const double e1 = std::exp(-principal_eigenvalue() * s);
  return {scaled.value * e1, scaled.grad * e1};
}

ValueGrad IntervalDomain::tilted_survival(double s, double v) const {
  require_positive_time(s, "tilted_survival");
  require_interior(v, "tilted_survival");
  return s < switch_time_ ? survival_images(s, v) : survival_eigen(s, v);
}

double IntervalDomain::grad_log_alpha(double s, double v) const {
  require_positive_time(s, "grad_log_alpha");
  require_interior(v, "grad_log_alpha");
  // The scaled eigen sums stay finite where exp(-lambda_1 s) would underflow.
  const ValueGrad a = s < switch_time_ ? survival_images(s, v) : survival_eigen_scaled(s, v);
  return a.grad / a.value - beta_grad(v) / beta(v);
}

std::vector<BoundaryMass> IntervalDomain::harmonic_measure(double v) const {
  require_interior(v, "harmonic_measure");
  return {{a_, (b_ - v) / length_}, {b_, (v - a_) / length_}};
}

std::vector<double> IntervalDomain::harmonic_measure_grad(double v) const {
  require_interior(v, "harmonic_measure_grad");
  return {-1.0 / length_, 1.0 / length_};
}

nlohmann::json IntervalDomain::to_json() const {
  return {{"kind", "interval"},
          {"a", a_},
          {"b", b_},
          {"rho", {{"a", rho_a_}, {"b", rho_b_}}},
          {"series_terms", series_terms_},
          {"switch_time", switch_time_}};
}

// ---------------------------------------------------------------------------
// HalfLineDomain

HalfLineDomain::HalfLineDomain(BoundaryWeight rho0) : rho0_(rho0.value()) {}

double HalfLineDomain::beta(double v) const {
  require_closed(v, "beta");
  return rho0_;
}

double HalfLineDomain::beta_grad(double v) const {
  require_closed(v, "beta_grad");
  return 0.0;
}

double HalfLineDomain::beta_hessian(double v) const {
  require_closed(v, "beta_hessian");
  return 0.0;
}

ValueGrad HalfLineDomain::killed_kernel_dx(double t, double x, double y) const {
  require_positive_time(t, "killed_kernel");
  require_interior(x, "killed_kernel");
  require_interior(y, "killed_kernel");
  const double g1 = gaussian_density(x - y, t);
  const double g2 = gaussian_density(x + y, t);
  return {g1 - g2, -(x - y) / t * g1 + (x + y) / t * g2};
}

ValueGrad HalfLineDomain::tilted_survival(double s, double v) const {
  require_positive_time(s, "tilted_survival");
  require_interior(v, "tilted_survival");
  // Reflection principle: P_v(tau > s) = erf(v / sqrt(2 s)).
  return {rho0_ * std::erf(v / std::sqrt(2.0 * s)), rho0_ * 2.0 * gaussian_density(v, s)};
}

std::vector<BoundaryMass> HalfLineDomain::harmonic_measure(double v) const {
  require_interior(v, "harmonic_measure");
  return {{0.0, 1.0}};
}

std::vector<double> HalfLineDomain::harmonic_measure_grad(double v) const {
  require_interior(v, "harmonic_measure_grad");
  return {0.0};
}

nlohmann::json HalfLineDomain::to_json() const {
  return {{"kind", "halfline"}, {"rho", {{"0", rho0_}}}};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

double number_at(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + "/" + key, "missing required field");
  if (!j.at(key).is_number()) throw ConfigError(path + "/" + key, "expected a number");
  return j.at(key).get<double>();
}

BoundaryWeight weight_at(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const double v = number_at(j, key, path);
  try {
    return BoundaryWeight(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + "/" + key, e.what());
  }
}

}  // namespace

std::shared_ptr<const DomainModel> domain_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError(path + "/kind", "missing domain kind");
  const std::string kind = j.at("kind").get<std::string>();
  if (!j.contains("rho") || !j.at("rho").is_object()) throw ConfigError(path + "/rho", "missing boundary weights");
  const auto& rho = j.at("rho");
  if (kind == "interval") {
    const double a = j.contains("a") ? number_at(j, "a", path) : 0.0;
    const double b = j.contains("b") ? number_at(j, "b", path) : 1.0;
    if (!(a < b)) throw ConfigError(path + "/b", "need a < b");
    int terms = IntervalDomain::kDefaultSeriesTerms;
    if (j.contains("series_terms")) {
      if (!j.at("series_terms").is_number_integer() || j.at("series_terms").get<int>() < 1) {
        throw ConfigError(path + "/series_terms", "expected a positive integer");
      }
      terms = j.at("series_terms").get<int>();
    }
    double switch_time = 0.0;
    if (j.contains("switch_time")) {
      switch_time = number_at(j, "switch_time", path);
      if (!(switch_time > 0.0)) throw ConfigError(path + "/switch_time", "must be positive");
    }
    return std::make_shared<IntervalDomain>(a, b, weight_at(rho, "a", path + "/rho"),
                                            weight_at(rho, "b", path + "/rho"), terms, switch_time);
  }
  if (kind == "halfline") {
    return std::make_shared<HalfLineDomain>(weight_at(rho, "0", path + "/rho"));
  }
  throw ConfigError(path + "/kind", "unknown domain kind '" + kind + "'");
}

BoundaryFunction boundary_function_from_json(const DomainModel& model, const nlohmann::json& j,
                                             const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object keyed by boundary label");
  BoundaryFunction f;
  for (const auto& label : model.boundary_labels()) {
    f.values.push_back(number_at(j, label, path));
  }
  return f;
}

nlohmann::json boundary_function_to_json(const DomainModel& model, const BoundaryFunction& f) {
  nlohmann::json j = nlohmann::json::object();
  const auto labels = model.boundary_labels();
  for (std::size_t i = 0; i < labels.size(); ++i) j[labels[i]] = f.values.at(i);
  return j;
}

}  // namespace kvchaos
