#pragma once
// Chaos kernels of phi(w(tau)) on the ordered time simplex 0 < t_1 < ... < t_n:
//
//   a_0 = T~phi(u)
//   a_n(t) = alpha(t_n,u)^{-1} ( T^k_{t_1} A_{t_2-t_1} ... A_{t_n-t_{n-1}} grad T~phi )(u)
//
// with the stage A_s h = alpha(s,.) grad T~^k_s h. Evaluation runs right to
// left; intermediate stages are cached by their increment suffix so product
// quadrature over the simplex reuses them.

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "kvchaos/semigroup.hpp"

namespace kvchaos {

class ChaosKernel {
 public:
  ChaosKernel(std::shared_ptr<const KilledSemigroup> ops, BoundaryFunction phi, double base_point);

  double base_point() const { return u_; }
  const BoundaryFunction& phi() const { return phi_; }
  const KilledSemigroup& ops() const { return *ops_; }
  const DomainModel& model() const { return ops_->model(); }

  /// T~phi(u).
  double a0() const { return a0_; }
  /// grad T~phi at the grid nodes, the integrand of the Clark representation.
  const GridFunction& clark_integrand() const { return integrand_; }

  /// a_n at strictly increasing positive times; n = times.size().
  double evaluate(std::span<const double> times) const;

  /// A_{d_1} ... A_{d_k} grad T~phi for increments d_1..d_k (applied right to left).
  GridFunction stage(std::span<const double> increments) const;

  /// (T^k_t h)(u) / alpha(horizon, u): the last step of the recursion.
  double close(double t1, const GridFunction& h, double horizon) const;

  std::size_t cached_stages() const;

 private:
  const OperatorRow& base_row(double t) const;

  std::shared_ptr<const KilledSemigroup> ops_;
  BoundaryFunction phi_;
  double u_;
  double a0_;
  GridFunction integrand_;
  mutable std::mutex mutex_;
  mutable std::map<std::vector<double>, GridFunction> stages_;
  mutable std::map<double, OperatorRow> rows_;
};

/// Product Gauss-Legendre rule in the increment variables s_1 = t_1,
/// s_k = t_k - t_{k-1}, each on [0, horizon].
struct SimplexQuadrature {
  double horizon = 0.0;
  std::size_t nodes_per_axis = 0;
  std::vector<double> nodes, weights;
  /// alpha(s,u) <= decay_constant * exp(-decay_rate * s).
  double decay_rate = 0.0;
  double decay_constant = 1.0;

  /// horizon is the first time with alpha(horizon,u) < alpha_cutoff, capped at max_horizon.
  static SimplexQuadrature for_base_point(const DomainModel& model, double u, std::size_t nodes_per_axis = 24,
                                          double alpha_cutoff = 1e-6, double max_horizon = 50.0);
};

struct ParsevalTerm {
  int order = 0;
  /// Quadrature of alpha(t_n,u) a_n^2 over the simplex within the horizon box.
  double value = 0.0;
  /// Estimate of the neglected mass with t_n > horizon: sup|a_n|^2 over the
  /// sampled points times the exact integral of the exponential alpha bound.
  double tail_bound = 0.0;
  double max_abs_kernel = 0.0;
};

ParsevalTerm parseval_term(const ChaosKernel& kernel, int order, const SimplexQuadrature& quad);

/// Kernel values at every product node: rows of (t_1..t_n, a_n).
std::vector<std::vector<double>> kernel_table(const ChaosKernel& kernel, int order, const SimplexQuadrature& quad);

/// E_{Q_u} phi(w(tau))^2 from the harmonic measure.
double second_moment(const DomainModel& model, const BoundaryFunction& phi, double u);

}  // namespace kvchaos
