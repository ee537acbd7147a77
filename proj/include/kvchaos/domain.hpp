#pragma once
// One-dimensional domains with a boundary weight rho, and the closed-form
// analytic data the operators are built from: the harmonic function beta,
// the tilted survival function alpha, the Dirichlet heat kernel of Brownian
// motion killed at the boundary, and the harmonic measure.
//
// alpha and the killed semigroup under the tilted measure Q_v are evaluated
// through the h-transform identity
//
//   E_{Q_v}[1_{tau>s} psi(w(s))] = beta(v)^{-1} \int p^k_s(v,y) beta(y) psi(y) dy,
//
// which follows from the Markov property at time s:
// E_v[1_{tau>s} rho(w(tau)) psi(w(s))] = E_v[1_{tau>s} beta(w(s)) psi(w(s))].
// Both concrete domains have tau < infinity almost surely.
//
// Series truncation: the image sum is cut where the Gaussian factor drops
// below exp(-45) of its peak; the eigenseries where exp(-(k^2-1) lambda_1 t)
// drops below 1e-17. With the default switch time (b-a)^2/pi^2 both sums stay
// under ~15 terms.

#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace kvchaos {

struct ValueGrad {
  double value = 0.0;
  double grad = 0.0;
};

/// Boundary weight rho restricted to a single boundary point; strictly inside (0,1).
class BoundaryWeight {
 public:
  explicit BoundaryWeight(double rho);
  double value() const { return rho_; }

 private:
  double rho_;
};

/// Mass of the harmonic measure at one boundary point.
struct BoundaryMass {
  double point;
  double mass;
};

/// Values of a function on the boundary, aligned with DomainModel::boundary_points().
struct BoundaryFunction {
  std::vector<double> values;
};

class DomainModel {
 public:
  virtual ~DomainModel() = default;

  virtual std::string kind() const = 0;
  virtual double lower() const = 0;
  /// +infinity for unbounded domains.
  virtual double upper() const = 0;
  virtual std::vector<double> boundary_points() const = 0;
  /// Boundary labels as used in JSON ("a","b" or "0").
  virtual std::vector<std::string> boundary_labels() const = 0;
  virtual std::vector<double> boundary_rho() const = 0;

  bool is_interior(double v) const { return v > lower() && v < upper(); }
  double distance_to_boundary(double v) const;

  /// beta(v) = E_v rho(w(tau)). Accepts boundary points (returns the limit).
  virtual double beta(double v) const = 0;
  virtual double beta_grad(double v) const = 0;
  virtual double beta_hessian(double v) const = 0;
  double grad_log_beta(double v) const;

  /// Dirichlet heat kernel of (1/2)Laplacian on the domain and its derivative in x.
  virtual ValueGrad killed_kernel_dx(double t, double x, double y) const = 0;
  double killed_kernel(double t, double x, double y) const { return killed_kernel_dx(t, x, y).value; }

  /// \int p^k_s(v,y) beta(y) dy = alpha(s,v) beta(v), with its derivative in v.
  virtual ValueGrad tilted_survival(double s, double v) const = 0;

  /// alpha(s,v) = Q_v(tau > s).
  double alpha(double s, double v) const;
  virtual double grad_log_alpha(double s, double v) const;

  virtual std::vector<BoundaryMass> harmonic_measure(double v) const = 0;
  /// d/dv of the masses returned by harmonic_measure.
  virtual std::vector<double> harmonic_measure_grad(double v) const = 0;

  /// Bottom of the Dirichlet spectrum of (1/2)Laplacian; 0 when there is no gap.
  virtual double principal_eigenvalue() const = 0;

  virtual nlohmann::json to_json() const = 0;

 protected:
  void require_interior(double v, const char* what) const;
  void require_closed(double v, const char* what) const;
  static void require_positive_time(double t, const char* what);
};

class IntervalDomain final : public DomainModel {
 public:
  static constexpr int kDefaultSeriesTerms = 50;

  /// switch_time <= 0 selects the default (b-a)^2/pi^2.
  IntervalDomain(double a, double b, BoundaryWeight rho_a, BoundaryWeight rho_b,
                 int series_terms = kDefaultSeriesTerms, double switch_time = 0.0);

  std::string kind() const override { return "interval"; }
  double lower() const override { return a_; }
  double upper() const override { return b_; }
  std::vector<double> boundary_points() const override { return {a_, b_}; }
  std::vector<std::string> boundary_labels() const override { return {"a", "b"}; }
  std::vector<double> boundary_rho() const override { return {rho_a_, rho_b_}; }

  double beta(double v) const override;
  double beta_grad(double v) const override;
  double beta_hessian(double v) const override;

  ValueGrad killed_kernel_dx(double t, double x, double y) const override;
  ValueGrad tilted_survival(double s, double v) const override;

  std::vector<BoundaryMass> harmonic_measure(double v) const override;
  std::vector<double> harmonic_measure_grad(double v) const override;
  double principal_eigenvalue() const override;
  nlohmann::json to_json() const override;

  double switch_time() const { return switch_time_; }
  int series_terms() const { return series_terms_; }

  // Both representations are exposed so they can be compared directly.
  ValueGrad kernel_images(double t, double x, double y) const;
  ValueGrad kernel_eigen(double t, double x, double y) const;
  ValueGrad survival_images(double s, double v) const;
  ValueGrad survival_eigen(double s, double v) const;

  double grad_log_alpha(double s, double v) const override;

 private:
  // Eigenseries sums for the survival function divided by exp(-lambda_1 s).
  ValueGrad survival_eigen_scaled(double s, double v) const;
  int image_count(double t) const;
  int eigen_count(double t) const;

  double a_, b_, length_;
  double rho_a_, rho_b_;
  int series_terms_;
  double switch_time_;
};

class HalfLineDomain final : public DomainModel {
 public:
  explicit HalfLineDomain(BoundaryWeight rho0);

  std::string kind() const override { return "halfline"; }
  double lower() const override { return 0.0; }
  double upper() const override { return std::numeric_limits<double>::infinity(); }
  std::vector<double> boundary_points() const override { return {0.0}; }
  std::vector<std::string> boundary_labels() const override { return {"0"}; }
  std::vector<double> boundary_rho() const override { return {rho0_}; }

  double beta(double v) const override;
  double beta_grad(double v) const override;
  double beta_hessian(double v) const override;

  ValueGrad killed_kernel_dx(double t, double x, double y) const override;
  ValueGrad tilted_survival(double s, double v) const override;

  std::vector<BoundaryMass> harmonic_measure(double v) const override;
  std::vector<double> harmonic_measure_grad(double v) const override;
  double principal_eigenvalue() const override { return 0.0; }
  nlohmann::json to_json() const override;

 private:
  double rho0_;
};

/// Thrown for malformed configuration; `field` is a JSON-pointer-like path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Parse {"kind":"interval"|"halfline", ...}. `path` prefixes error field paths.
std::shared_ptr<const DomainModel> domain_from_json(const nlohmann::json& j, const std::string& path = "/domain");

/// Parse boundary values keyed by the model's boundary labels.
BoundaryFunction boundary_function_from_json(const DomainModel& model, const nlohmann::json& j,
                                             const std::string& path = "/phi");
nlohmann::json boundary_function_to_json(const DomainModel& model, const BoundaryFunction& f);

}  // namespace kvchaos
