#pragma once
// Multiple stochastic integrals I_n(a_n) along simulated paths.
//
// Kernels are tabulated on a coarse time grid with cell h = stride * dt and
// evaluated at cell midpoints. For n >= 2 the inner integrals use the
// increments of w^_{s_m} conditioned at the outer cell time s_m:
//
//   I_2 = sum_m dW~_m sum_{i<m} a_2(i,m) (dW~_i - grad log alpha(s_m - s_i, w(s_i)) d_i)
//
// where dW~_i is the sum of the fine increments of w~ in cell i and d_i the
// cell duration inside the stopped path.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "kvchaos/estimate.hpp"
#include "kvchaos/kv_kernel.hpp"
#include "kvchaos/path_sim.hpp"

namespace kvchaos {

inline constexpr int kMaxChaosOrder = 3;

struct MCConfig {
  std::size_t n_samples = 100000;
  double dt = 1e-4;
  /// 0 selects the first time with alpha(T,u) < horizon_alpha, capped at max_horizon.
  double horizon = 0.0;
  double horizon_alpha = 1e-4;
  double max_horizon = 10.0;
  std::uint64_t seed = 20240601;
  std::uint64_t stream = 0;
  /// 0 uses KVCHAOS_WORKERS or the hardware concurrency.
  std::size_t workers = 0;
  /// P (reweighted) or Q.
  Measure sampler = Measure::Q;
  /// Kernel cell widths in fine steps for orders 1, 2, 3.
  std::size_t stride1 = 1;
  std::size_t stride2 = 10;
  std::size_t stride3 = 100;

  std::size_t stride(int order) const;
};

/// Simulation horizon, a multiple of every kernel cell.
double simulation_horizon(const DomainModel& model, double u, const MCConfig& cfg);

/// Kernel values at cell midpoints of the ordered cell tuples i_1 < ... < i_n.
class GridKernelTable {
 public:
  GridKernelTable() = default;

  static GridKernelTable constant(double a0);
  /// Tabulates kernel.evaluate at midpoint times; cells cover [0, cells*cell).
  static GridKernelTable tabulate(const ChaosKernel& kernel, int order, double cell, std::size_t cells,
                                  std::size_t workers = 0);
  /// Tabulates an arbitrary function of the midpoint times.
  static GridKernelTable from_function(int order, double cell, std::size_t cells,
                                       const std::function<double(std::span<const double>)>& fn);

  int order() const { return order_; }
  double cell() const { return cell_; }
  std::size_t cells() const { return cells_; }
  double a0() const { return constant_; }

  double at(std::size_t m) const { return values_[m]; }
  double at(std::size_t i, std::size_t m) const { return values_[m * (m - 1) / 2 + i]; }
  double at(std::size_t i, std::size_t j, std::size_t m) const {
    return values_[m * (m - 1) * (m - 2) / 6 + j * (j - 1) / 2 + i];
  }
  std::span<const double> values() const { return values_; }

  GridKernelTable scaled(double c) const;

 private:
  static std::size_t packed_size(int order, std::size_t cells);

  int order_ = 0;
  double cell_ = 0.0;
  std::size_t cells_ = 0;
  double constant_ = 0.0;
  std::vector<double> values_;
};

struct IteratedIntegralValue {
  int order = 0;
  double value = 0.0;
};

/// I_n of the tabulated kernel along a Q_u path or a weighted P_u path.
IteratedIntegralValue iterated_integral(const DomainModel& model, const PathSample& path,
                                        const GridKernelTable& kernel);

/// phi(w(tau)) for exited paths, T~phi(w(T)) for paths still inside at the horizon.
double stopped_functional(const DomainModel& model, const BoundaryFunction& phi, const PathSample& path);

/// sum_i grad T~phi(w_i) dw~_i over the stopped path.
double clark_integral(const DomainModel& model, const BoundaryFunction& phi, const PathSample& path);

/// Kernel tables of orders 0..N for one simulation setup.
std::vector<GridKernelTable> chaos_tables(const ChaosKernel& kernel, int max_order, const MCConfig& cfg);

/// Per-path quantities of one shared simulation pass.
struct ChaosSamples {
  std::vector<double> weight;
  std::vector<double> f;
  std::vector<double> clark;
  /// integrals[n][k] = I_n along path k.
  std::vector<std::vector<double>> integrals;
  std::size_t truncated = 0;
  double horizon = 0.0;
};

/// Simulates cfg.n_samples paths and evaluates every table along each one.
ChaosSamples sample_chaos(const DomainModel& model, const BoundaryFunction& phi, double u,
                          std::span<const GridKernelTable> tables, const MCConfig& cfg, bool with_clark);

/// Weighted MC estimate of E_Q (f - sum_{n<=N} I_n)^2.
MCEstimate residual_estimate(const ChaosSamples& s, int max_order);
/// Weighted MC estimate of E_Q I_m I_n.
MCEstimate product_estimate(const ChaosSamples& s, int m, int n);
/// Weighted MC estimate of E_Q (f - a0 - Clark sum)^2.
MCEstimate clark_estimate(const ChaosSamples& s, double a0);
/// Weighted MC estimate of E_Q f^2.
MCEstimate second_moment_estimate(const ChaosSamples& s);

MCEstimate expansion_partial_sum(const ChaosKernel& kernel, int max_order, const MCConfig& cfg);
MCEstimate orthogonality_estimate(const DomainModel& model, const BoundaryFunction& phi, double u,
                                  const GridKernelTable& a_m, const GridKernelTable& a_n, const MCConfig& cfg);
MCEstimate clark_residual(const DomainModel& model, double u, const BoundaryFunction& phi, const MCConfig& cfg);

struct Eq1Result {
  MCEstimate lhs;
  double rhs = 0.0;
  /// |rhs - rhs with the finer time rule|.
  double rhs_quadrature_error = 0.0;
  std::size_t failed_paths = 0;
  std::size_t clamp_events = 0;
};

/// E_{Q_{t,u}} psi(w(t)) int_0^t g dw^_t by simulation against
/// int_0^t alpha(s,u)/alpha(t,u) T~^k_s[alpha(t-s,.) grad T~^k_{t-s} psi](u) g(s) ds.
Eq1Result eq1_check(const KilledSemigroup& ops, double u, double t, const std::function<double(double)>& psi,
                    const std::function<double(double)>& g, const MCConfig& cfg, std::size_t time_nodes = 32);

}  // namespace kvchaos
