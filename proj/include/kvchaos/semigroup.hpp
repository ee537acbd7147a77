#pragma once
// Operators acting on functions of the domain:
//   T psi(v)        = sum_boundary rho psi mu_v                  (boundary data)
//   T~ psi(v)       = T psi(v) / beta(v)
//   T^k_s f(v)      = beta(v)^{-1} \int p^k_s(v,y) beta(y) f(y) dy
//   T~^k_s f(v)     = T^k_s f(v) / alpha(s,v)
// Functions on the domain are carried as values at Gauss-Legendre nodes.
// T^k_s is applied by product integration: the kernel is integrated exactly
// (to quadrature precision) against the barycentric interpolant of f, on
// panels bounded by the grid nodes and refined to the kernel width sqrt(s).
// This keeps the operator accurate for s far below the node spacing.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <vector>

#include "kvchaos/domain.hpp"
#include "kvchaos/quadrature.hpp"

namespace kvchaos {

struct GridSettings {
  std::size_t nodes = 64;
  /// Half-line grids cover (0, u + halfline_cutoff).
  double halfline_cutoff = 10.0;
};

class QuadratureGrid {
 public:
  /// Gauss-Legendre nodes on the interval, or on (0, base_point + cutoff) for the half-line.
  static std::shared_ptr<const QuadratureGrid> for_model(const DomainModel& model, const GridSettings& settings,
                                                         double base_point);

  QuadratureGrid(double lo, double hi, std::size_t nodes);

  std::size_t size() const { return nodes_.size(); }
  double lower() const { return lo_; }
  double upper() const { return hi_; }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> bary_weights() const { return bary_; }

  double integrate(std::span<const double> values) const;
  double interpolate(std::span<const double> values, double x) const;

 private:
  double lo_, hi_;
  std::vector<double> nodes_, weights_, bary_;
};

/// Values at the nodes of a grid. tensor_rank counts applied gradients; in one
/// dimension values stay scalar.
struct GridFunction {
  std::shared_ptr<const QuadratureGrid> grid;
  std::vector<double> values;
  int tensor_rank = 0;

  static GridFunction constant(std::shared_ptr<const QuadratureGrid> grid, double c);
  static GridFunction from(std::shared_ptr<const QuadratureGrid> grid, const std::function<double(double)>& f);

  double operator()(double x) const { return grid->interpolate(values, x); }
  std::size_t size() const { return values.size(); }
};

// Boundary operators. boundary_values is aligned with model.boundary_points().
double op_T(const DomainModel& model, const BoundaryFunction& psi, double v);
double op_T_tilde(const DomainModel& model, const BoundaryFunction& psi, double v);
double grad_op_T_tilde(const DomainModel& model, const BoundaryFunction& psi, double v);
/// Second derivative of T~ psi; used to check the generator equation.
double hessian_op_T_tilde(const DomainModel& model, const BoundaryFunction& psi, double v);
/// grad T~ psi sampled at grid nodes (tensor rank 1).
GridFunction grad_op_T_tilde_on(const DomainModel& model, const BoundaryFunction& psi,
                                std::shared_ptr<const QuadratureGrid> grid);

/// Product-integration rows for one evaluation point v and time s:
///   value[j] = \int p^k_s(v,y) beta(y) l_j(y) dy
///   deriv[j] = \int d_v p^k_s(v,y) beta(y) l_j(y) dy
/// together with the closed-form survival A = alpha(s,v) beta(v) and dA/dv.
struct OperatorRow {
  std::vector<double> value;
  std::vector<double> deriv;
  double beta = 0.0;
  double beta_grad = 0.0;
  ValueGrad survival;
};

/// Row-stacked OperatorRow for every grid node.
struct OperatorMatrices {
  double time = 0.0;
  std::size_t size = 0;
  std::vector<double> value;  // row-major size x size
  std::vector<double> deriv;
  std::vector<double> beta, beta_grad, survival, survival_grad;
};

class KilledSemigroup {
 public:
  KilledSemigroup(std::shared_ptr<const DomainModel> model, std::shared_ptr<const QuadratureGrid> grid);

  const DomainModel& model() const { return *model_; }
  std::shared_ptr<const DomainModel> model_ptr() const { return model_; }
  std::shared_ptr<const QuadratureGrid> grid() const { return grid_; }

  OperatorRow row(double s, double v) const;
  /// Assemble without touching the cache.
  OperatorMatrices build(double s) const;
  /// Cached assembly; the returned matrices are bit-identical to build(s).
  std::shared_ptr<const OperatorMatrices> matrices(double s) const;
  std::size_t cache_size() const;

  GridFunction apply(double s, const GridFunction& f) const;        // T^k_s
  GridFunction apply_tilde(double s, const GridFunction& f) const;  // T~^k_s
  GridFunction grad_tilde(double s, const GridFunction& f) const;   // grad T~^k_s, rank + 1
  /// alpha(s,.) grad T~^k_s f: the stage applied between consecutive kernel times.
  GridFunction alpha_grad_tilde(double s, const GridFunction& f) const;
  /// Same stage from explicitly supplied matrices.
  GridFunction alpha_grad_tilde(const OperatorMatrices& m, const GridFunction& f) const;

  // Off-grid evaluation at an interior point.
  double apply_at(double s, const GridFunction& f, double v) const;
  double apply_tilde_at(double s, const GridFunction& f, double v) const;
  double grad_tilde_at(double s, const GridFunction& f, double v) const;

 private:
  void check(double s, const GridFunction& f) const;

  std::shared_ptr<const DomainModel> model_;
  std::shared_ptr<const QuadratureGrid> grid_;
  std::vector<double> panel_edges_;
  GaussRule panel_rule_;
  mutable std::shared_mutex cache_mutex_;
  mutable std::map<double, std::shared_ptr<const OperatorMatrices>> cache_;
};

}  // namespace kvchaos
