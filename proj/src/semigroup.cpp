#include "kvchaos/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "kvchaos/simd.hpp"

namespace kvchaos {

namespace {

constexpr std::size_t kPanelPoints = 10;
// The kernel is negligible (< exp(-60)) beyond this many standard deviations.
constexpr double kWindowSigmas = 11.0;
// Sub-panels are refined to at most this fraction of the kernel width.
constexpr double kPieceSigmas = 0.5;

}  // namespace

// ---------------------------------------------------------------------------
// QuadratureGrid

QuadratureGrid::QuadratureGrid(double lo, double hi, std::size_t nodes) : lo_(lo), hi_(hi) {
  if (nodes < 2) throw std::invalid_argument("QuadratureGrid: need at least two nodes");
  GaussRule rule = gauss_legendre(nodes, lo, hi);
  bary_ = gauss_barycentric_weights(rule);
  nodes_ = std::move(rule.nodes);
  weights_ = std::move(rule.weights);
}

std::shared_ptr<const QuadratureGrid> QuadratureGrid::for_model(const DomainModel& model,
                                                                const GridSettings& settings, double base_point) {
  if (!std::isfinite(model.upper())) {
    if (!(settings.halfline_cutoff > 0.0)) throw std::invalid_argument("halfline_cutoff must be positive");
    return std::make_shared<QuadratureGrid>(model.lower(), base_point + settings.halfline_cutoff, settings.nodes);
  }
  return std::make_shared<QuadratureGrid>(model.lower(), model.upper(), settings.nodes);
}

double QuadratureGrid::integrate(std::span<const double> values) const {
  return simd::dot(weights_, values);
}

double QuadratureGrid::interpolate(std::span<const double> values, double x) const {
  return barycentric_interpolate(x, nodes_, bary_, values);
}

GridFunction GridFunction::constant(std::shared_ptr<const QuadratureGrid> grid, double c) {
  GridFunction f{grid, std::vector<double>(grid->size(), c), 0};
  return f;
}

GridFunction GridFunction::from(std::shared_ptr<const QuadratureGrid> grid, const std::function<double(double)>& fn) {
  GridFunction f{grid, {}, 0};
  f.values.reserve(grid->size());
  for (double x : grid->nodes()) f.values.push_back(fn(x));
  return f;
}

// ---------------------------------------------------------------------------
// Boundary operators

namespace {

void check_boundary(const DomainModel& model, const BoundaryFunction& psi) {
  if (psi.values.size() != model.boundary_points().size()) {
    throw ConfigError("/phi", "boundary function must give a value for every boundary point");
  }
}

}  // namespace

double op_T(const DomainModel& model, const BoundaryFunction& psi, double v) {
  check_boundary(model, psi);
  const auto mu = model.harmonic_measure(v);
  const auto rho = model.boundary_rho();
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += rho[i] * psi.values[i] * mu[i].mass;
  return s;
}

namespace {

// T~ preserves constants, so T~psi = psi_0 + T~(psi - psi_0); constant data
// then gives an exact constant and an exactly zero gradient.
BoundaryFunction shifted(const BoundaryFunction& psi) {
  BoundaryFunction d = psi;
  for (double& x : d.values) x -= psi.values[0];
  return d;
}

}  // namespace

double op_T_tilde(const DomainModel& model, const BoundaryFunction& psi, double v) {
  check_boundary(model, psi);
  return psi.values[0] + op_T(model, shifted(psi), v) / model.beta(v);
}

namespace {

double op_T_grad(const DomainModel& model, const BoundaryFunction& psi, double v) {
  const auto dmu = model.harmonic_measure_grad(v);
  const auto rho = model.boundary_rho();
  double s = 0.0;
  for (std::size_t i = 0; i < dmu.size(); ++i) s += rho[i] * psi.values[i] * dmu[i];
  return s;
}

}  // namespace

double grad_op_T_tilde(const DomainModel& model, const BoundaryFunction& psi_in, double v) {
  check_boundary(model, psi_in);
  const BoundaryFunction psi = shifted(psi_in);
  const double t = op_T(model, psi, v);
  const double dt = op_T_grad(model, psi, v);
  const double b = model.beta(v);
  const double db = model.beta_grad(v);
  return (dt * b - t * db) / (b * b);
}

double hessian_op_T_tilde(const DomainModel& model, const BoundaryFunction& psi_in, double v) {
  check_boundary(model, psi_in);
  const BoundaryFunction psi = shifted(psi_in);
  // T psi is harmonic, hence affine in one dimension.
  const double t = op_T(model, psi, v);
  const double dt = op_T_grad(model, psi, v);
  const double b = model.beta(v);
  const double db = model.beta_grad(v);
  const double ddb = model.beta_hessian(v);
  return -t * ddb / (b * b) - 2.0 * db * (dt * b - t * db) / (b * b * b);
}

GridFunction grad_op_T_tilde_on(const DomainModel& model, const BoundaryFunction& psi,
                                std::shared_ptr<const QuadratureGrid> grid) {
  GridFunction f = GridFunction::from(grid, [&](double x) { return grad_op_T_tilde(model, psi, x); });
  f.tensor_rank = 1;
  return f;
}

// ---------------------------------------------------------------------------
// KilledSemigroup

KilledSemigroup::KilledSemigroup(std::shared_ptr<const DomainModel> model, std::shared_ptr<const QuadratureGrid> grid)
    : model_(std::move(model)), grid_(std::move(grid)), panel_rule_(gauss_legendre(kPanelPoints)) {
  if (!model_ || !grid_) throw std::invalid_argument("KilledSemigroup: null model or grid");
  if (grid_->lower() < model_->lower() || grid_->upper() > model_->upper()) {
    throw std::invalid_argument("KilledSemigroup: grid extends outside the domain");
  }
  panel_edges_.push_back(grid_->lower());
  for (double x : grid_->nodes()) panel_edges_.push_back(x);
  panel_edges_.push_back(grid_->upper());
}

OperatorRow KilledSemigroup::row(double s, double v) const {
  if (!(s > 0.0)) throw std::domain_error("killed semigroup: time must be positive");
  if (!model_->is_interior(v) || !(v > grid_->lower() && v < grid_->upper())) {
    throw std::domain_error("killed semigroup: evaluation point must be strictly interior");
  }
  const std::size_t m = grid_->size();
  OperatorRow r;
  r.value.assign(m, 0.0);
  r.deriv.assign(m, 0.0);
  r.beta = model_->beta(v);
  r.beta_grad = model_->beta_grad(v);
  r.survival = model_->tilted_survival(s, v);

  const double sigma = std::sqrt(s);
  const double lo = std::max(grid_->lower(), v - kWindowSigmas * sigma);
  const double hi = std::min(grid_->upper(), v + kWindowSigmas * sigma);
  const double max_piece = kPieceSigmas * sigma;
  std::vector<double> basis(m);
  const auto nodes = grid_->nodes();
  const auto bary = grid_->bary_weights();

  for (std::size_t p = 0; p + 1 < panel_edges_.size(); ++p) {
    const double e0 = std::max(panel_edges_[p], lo);
    const double e1 = std::min(panel_edges_[p + 1], hi);
    if (!(e1 > e0)) continue;
    const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil((e1 - e0) / max_piece)));
    const double width = (e1 - e0) / static_cast<double>(pieces);
    for (std::size_t q = 0; q < pieces; ++q) {
      const double c0 = e0 + width * static_cast<double>(q);
      for (std::size_t k = 0; k < kPanelPoints; ++k) {
        const double y = c0 + 0.5 * width * (panel_rule_.nodes[k] + 1.0);
        const double w = 0.5 * width * panel_rule_.weights[k];
        const ValueGrad kv = model_->killed_kernel_dx(s, v, y);
        if (kv.value == 0.0 && kv.grad == 0.0) continue;
        const double wb = w * model_->beta(y);
        simd::barycentric_basis(y, nodes, bary, basis);
        simd::axpy(wb * kv.value, basis, r.value);
        simd::axpy(wb * kv.grad, basis, r.deriv);
      }
    }
  }
  return r;
}

OperatorMatrices KilledSemigroup::build(double s) const {
  const std::size_t m = grid_->size();
  OperatorMatrices out;
  out.time = s;
  out.size = m;
  out.value.resize(m * m);
  out.deriv.resize(m * m);
  out.beta.resize(m);
  out.beta_grad.resize(m);
  out.survival.resize(m);
  out.survival_grad.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const OperatorRow r = row(s, grid_->nodes()[i]);
    std::copy(r.value.begin(), r.value.end(), out.value.begin() + static_cast<std::ptrdiff_t>(i * m));
    std::copy(r.deriv.begin(), r.deriv.end(), out.deriv.begin() + static_cast<std::ptrdiff_t>(i * m));
    out.beta[i] = r.beta;
    out.beta_grad[i] = r.beta_grad;
    out.survival[i] = r.survival.value;
    out.survival_grad[i] = r.survival.grad;
  }
  return out;
}

std::shared_ptr<const OperatorMatrices> KilledSemigroup::matrices(double s) const {
  {
    std::shared_lock lock(cache_mutex_);
    if (auto it = cache_.find(s); it != cache_.end()) return it->second;
  }
  auto built = std::make_shared<const OperatorMatrices>(build(s));
  std::unique_lock lock(cache_mutex_);
  auto [it, inserted] = cache_.emplace(s, std::move(built));
  return it->second;
}

std::size_t KilledSemigroup::cache_size() const {
  std::shared_lock lock(cache_mutex_);
  return cache_.size();
}

void KilledSemigroup::check(double s, const GridFunction& f) const {
  if (!(s > 0.0)) throw std::domain_error("killed semigroup: time must be positive");
  if (f.size() != grid_->size()) throw std::invalid_argument("killed semigroup: value count mismatch");
}

GridFunction KilledSemigroup::apply(double s, const GridFunction& f) const {
  check(s, f);
  const auto m = matrices(s);
  GridFunction out{grid_, std::vector<double>(m->size), f.tensor_rank};
  for (std::size_t i = 0; i < m->size; ++i) {
    out.values[i] = simd::dot(std::span(m->value).subspan(i * m->size, m->size), f.values) / m->beta[i];
  }
  return out;
}

GridFunction KilledSemigroup::apply_tilde(double s, const GridFunction& f) const {
  check(s, f);
  const auto m = matrices(s);
  GridFunction out{grid_, std::vector<double>(m->size), f.tensor_rank};
  for (std::size_t i = 0; i < m->size; ++i) {
    out.values[i] = simd::dot(std::span(m->value).subspan(i * m->size, m->size), f.values) / m->survival[i];
  }
  return out;
}

GridFunction KilledSemigroup::grad_tilde(double s, const GridFunction& f) const {
  check(s, f);
  const auto m = matrices(s);
  GridFunction out{grid_, std::vector<double>(m->size), f.tensor_rank + 1};
  for (std::size_t i = 0; i < m->size; ++i) {
    const double n = simd::dot(std::span(m->value).subspan(i * m->size, m->size), f.values);
    const double d = simd::dot(std::span(m->deriv).subspan(i * m->size, m->size), f.values);
    const double a = m->survival[i];
    out.values[i] = d / a - n * m->survival_grad[i] / (a * a);
  }
  return out;
}

GridFunction KilledSemigroup::alpha_grad_tilde(const OperatorMatrices& m, const GridFunction& f) const {
  if (f.size() != m.size) throw std::invalid_argument("killed semigroup: value count mismatch");
  GridFunction out{grid_, std::vector<double>(m.size), f.tensor_rank + 1};
  for (std::size_t i = 0; i < m.size; ++i) {
    const double n = simd::dot(std::span(m.value).subspan(i * m.size, m.size), f.values);
    const double d = simd::dot(std::span(m.deriv).subspan(i * m.size, m.size), f.values);
    out.values[i] = (d - n * m.survival_grad[i] / m.survival[i]) / m.beta[i];
  }
  return out;
}

GridFunction KilledSemigroup::alpha_grad_tilde(double s, const GridFunction& f) const {
  check(s, f);
  return alpha_grad_tilde(*matrices(s), f);
}

double KilledSemigroup::apply_at(double s, const GridFunction& f, double v) const {
  check(s, f);
  const OperatorRow r = row(s, v);
  return simd::dot(r.value, f.values) / r.beta;
}

double KilledSemigroup::apply_tilde_at(double s, const GridFunction& f, double v) const {
  check(s, f);
  const OperatorRow r = row(s, v);
  return simd::dot(r.value, f.values) / r.survival.value;
}

double KilledSemigroup::grad_tilde_at(double s, const GridFunction& f, double v) const {
  check(s, f);
  const OperatorRow r = row(s, v);
  const double n = simd::dot(r.value, f.values);
  const double d = simd::dot(r.deriv, f.values);
  const double a = r.survival.value;
  return d / a - n * r.survival.grad / (a * a);
}

}  // namespace kvchaos
