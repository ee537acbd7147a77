#include "kvchaos/chaos_mc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "kvchaos/parallel.hpp"
#include "kvchaos/quadrature.hpp"
#include "kvchaos/simd.hpp"

namespace kvchaos {

std::size_t MCConfig::stride(int order) const {
  switch (order) {
    case 1: return stride1;
    case 2: return stride2;
    case 3: return stride3;
    default: return 1;
  }
}

double simulation_horizon(const DomainModel& model, double u, const MCConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("mc: dt must be positive");
  double T = cfg.horizon;
  if (T <= 0.0) {
    T = cfg.max_horizon;
    if (model.principal_eigenvalue() > 0.0 && model.alpha(cfg.max_horizon, u) < cfg.horizon_alpha) {
      double lo = 0.0, hi = cfg.max_horizon;
      for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (model.alpha(mid, u) >= cfg.horizon_alpha ? lo : hi) = mid;
      }
      T = hi;
    }
  }
  const std::size_t unit = std::lcm(std::lcm(cfg.stride1, cfg.stride2), cfg.stride3);
  const double block = cfg.dt * static_cast<double>(unit);
  return block * std::ceil(T / block - 1e-9);
}

// ---------------------------------------------------------------------------
// GridKernelTable

std::size_t GridKernelTable::packed_size(int order, std::size_t c) {
  switch (order) {
    case 0: return 0;
    case 1: return c;
    case 2: return c * (c - 1) / 2;
    case 3: return c * (c - 1) * (c - 2) / 6;
    default: throw std::invalid_argument("kernel table: unsupported order " + std::to_string(order));
  }
}

GridKernelTable GridKernelTable::constant(double a0) {
  GridKernelTable t;
  t.constant_ = a0;
  return t;
}

GridKernelTable GridKernelTable::from_function(int order, double cell, std::size_t cells,
                                               const std::function<double(std::span<const double>)>& fn) {
  if (order == 0) return constant(fn({}));
  if (!(cell > 0.0)) throw std::invalid_argument("kernel table: cell must be positive");
  GridKernelTable t;
  t.order_ = order;
  t.cell_ = cell;
  t.cells_ = cells;
  t.values_.resize(packed_size(order, cells));
  auto mid = [cell](std::size_t i) { return (static_cast<double>(i) + 0.5) * cell; };
  if (order == 1) {
    for (std::size_t m = 0; m < cells; ++m) {
      const double x[1] = {mid(m)};
      t.values_[m] = fn(x);
    }
  } else if (order == 2) {
    for (std::size_t m = 1; m < cells; ++m)
      for (std::size_t i = 0; i < m; ++i) {
        const double x[2] = {mid(i), mid(m)};
        t.values_[m * (m - 1) / 2 + i] = fn(x);
      }
  } else {
    for (std::size_t m = 2; m < cells; ++m)
      for (std::size_t j = 1; j < m; ++j)
        for (std::size_t i = 0; i < j; ++i) {
          const double x[3] = {mid(i), mid(j), mid(m)};
          t.values_[m * (m - 1) * (m - 2) / 6 + j * (j - 1) / 2 + i] = fn(x);
        }
  }
  return t;
}

GridKernelTable GridKernelTable::tabulate(const ChaosKernel& kernel, int order, double cell, std::size_t cells,
                                          std::size_t workers) {
  if (order == 0) return constant(kernel.a0());
  if (!(cell > 0.0)) throw std::invalid_argument("kernel table: cell must be positive");
  GridKernelTable t;
  t.order_ = order;
  t.cell_ = cell;
  t.cells_ = cells;
  t.values_.resize(packed_size(order, cells));
  const KilledSemigroup& ops = kernel.ops();
  const DomainModel& model = kernel.model();
  const double u = kernel.base_point();
  auto mid = [cell](std::size_t i) { return (static_cast<double>(i) + 0.5) * cell; };

  // (T^k_{t_1} h)(u) = row(t_1)·h / beta(u) for every first cell.
  const auto rows = parallel_map<std::vector<double>>(cells, workers, [&](std::size_t i) {
    return ops.row(mid(i), u).value;
  });
  std::vector<double> inv_alpha(cells);
  for (std::size_t m = 0; m < cells; ++m) inv_alpha[m] = 1.0 / (model.beta(u) * model.alpha(mid(m), u));
  const GridFunction& g = kernel.clark_integrand();

  if (order == 1) {
    for (std::size_t m = 0; m < cells; ++m) t.values_[m] = simd::dot(rows[m], g.values) * inv_alpha[m];
    return t;
  }
  // Stage for every gap k: A_{k h} grad T~phi, and for order 3 also A_{k h} A_{l h} grad T~phi.
  const auto mats = parallel_map<std::shared_ptr<const OperatorMatrices>>(cells, workers, [&](std::size_t k) {
    return k == 0 ? nullptr : std::make_shared<const OperatorMatrices>(ops.build(static_cast<double>(k) * cell));
  });
  std::vector<GridFunction> h1(cells);
  for (std::size_t k = 1; k < cells; ++k) h1[k] = ops.alpha_grad_tilde(*mats[k], g);
  if (order == 2) {
    for (std::size_t m = 1; m < cells; ++m)
      for (std::size_t i = 0; i < m; ++i)
        t.values_[m * (m - 1) / 2 + i] = simd::dot(rows[i], h1[m - i].values) * inv_alpha[m];
    return t;
  }
  // Order 3: a_3(i,j,m) = row(t_i) · A_{(j-i)h} A_{(m-j)h} g / (beta alpha(t_m)).
  for (std::size_t k3 = 1; k3 + 1 < cells; ++k3) {
    for (std::size_t k2 = 1; k2 + k3 < cells; ++k2) {
      const GridFunction h2 = ops.alpha_grad_tilde(*mats[k2], h1[k3]);
      for (std::size_t i = 0; i + k2 + k3 < cells; ++i) {
        const std::size_t j = i + k2, m = j + k3;
        t.values_[m * (m - 1) * (m - 2) / 6 + j * (j - 1) / 2 + i] = simd::dot(rows[i], h2.values) * inv_alpha[m];
      }
    }
  }
  return t;
}

GridKernelTable GridKernelTable::scaled(double c) const {
  GridKernelTable t = *this;
  t.constant_ *= c;
  for (double& v : t.values_) v *= c;
  return t;
}

// ---------------------------------------------------------------------------
// Path integrals

namespace {

void check_path(const PathSample& path) {
  if (path.measure == Measure::Qt) throw std::invalid_argument("iterated integral: Q_{t,u} paths are not Q_u-consistent");
  if (!(path.weight > 0.0) || !std::isfinite(path.weight))
    throw std::invalid_argument("iterated integral: path weight must be positive and finite");
  if (path.measure == Measure::Q && path.weight != 1.0)
    throw std::invalid_argument("iterated integral: Q paths carry unit weight");
}

struct CoarsePath {
  std::vector<double> dw;    // summed w~ increments per cell
  std::vector<double> dur;   // duration inside the stopped path
  std::vector<double> left;  // position at the cell's left end
};

CoarsePath coarsen(const PathSample& path, std::span<const double> dwt, std::size_t stride) {
  const std::size_t steps = dwt.size();
  const std::size_t cells = (steps + stride - 1) / stride;
  CoarsePath c;
  c.dw.assign(cells, 0.0);
  c.dur.assign(cells, 0.0);
  c.left.resize(cells);
  for (std::size_t k = 0; k < cells; ++k) c.left[k] = path.positions[k * stride];
  for (std::size_t i = 0; i < steps; ++i) {
    c.dw[i / stride] += dwt[i];
    c.dur[i / stride] += path.step_duration(i);
  }
  return c;
}

std::size_t table_stride(const GridKernelTable& t, double dt) {
  const double r = t.cell() / dt;
  const double s = std::round(r);
  if (s < 1.0 || std::abs(r - s) > 1e-9 * r) throw std::invalid_argument("kernel table cell must be a multiple of dt");
  return static_cast<std::size_t>(s);
}

double integral_with(const DomainModel& model, const PathSample& path, std::span<const double> dwt,
                     const GridKernelTable& t) {
  if (t.order() == 0) return t.a0();
  const std::size_t stride = table_stride(t, path.grid.dt);
  const CoarsePath c = coarsen(path, dwt, stride);
  const std::size_t cells = c.dw.size();
  if (cells > t.cells()) throw std::invalid_argument("kernel table shorter than the path");
  const double h = t.cell();
  double total = 0.0;
  if (t.order() == 1) {
    for (std::size_t m = 0; m < cells; ++m) total += t.at(m) * c.dw[m];
    return total;
  }
  std::vector<double> hat(cells);
  for (std::size_t m = 1; m < cells; ++m) {
    for (std::size_t i = 0; i < m; ++i)
      hat[i] = c.dw[i] - model.grad_log_alpha(static_cast<double>(m - i) * h, c.left[i]) * c.dur[i];
    double inner = 0.0;
    if (t.order() == 2) {
      for (std::size_t i = 0; i < m; ++i) inner += t.at(i, m) * hat[i];
    } else {
      for (std::size_t j = 1; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < j; ++i) s += t.at(i, j, m) * hat[i];
        inner += s * hat[j];
      }
    }
    total += inner * c.dw[m];
  }
  return total;
}

}  // namespace

IteratedIntegralValue iterated_integral(const DomainModel& model, const PathSample& path,
                                        const GridKernelTable& kernel) {
  if (kernel.order() > kMaxChaosOrder) throw std::invalid_argument("iterated integral: unsupported order");
  check_path(path);
  const std::vector<double> dwt = increments_w_tilde(model, path);
  return {kernel.order(), integral_with(model, path, dwt, kernel)};
}

double stopped_functional(const DomainModel& model, const BoundaryFunction& phi, const PathSample& path) {
  if (path.exited()) return phi.values.at(static_cast<std::size_t>(path.exit_boundary));
  return op_T_tilde(model, phi, path.end_position());
}

namespace {

double clark_sum(const DomainModel& model, const BoundaryFunction& phi, const PathSample& path,
                 std::span<const double> dwt) {
  double s = 0.0;
  for (std::size_t i = 0; i < dwt.size(); ++i) s += grad_op_T_tilde(model, phi, path.positions[i]) * dwt[i];
  return s;
}

}  // namespace

double clark_integral(const DomainModel& model, const BoundaryFunction& phi, const PathSample& path) {
  check_path(path);
  const std::vector<double> dwt = increments_w_tilde(model, path);
  return clark_sum(model, phi, path, dwt);
}

std::vector<GridKernelTable> chaos_tables(const ChaosKernel& kernel, int max_order, const MCConfig& cfg) {
  if (max_order < 0 || max_order > kMaxChaosOrder) throw std::invalid_argument("chaos: unsupported order");
  const double T = simulation_horizon(kernel.model(), kernel.base_point(), cfg);
  std::vector<GridKernelTable> out;
  out.push_back(GridKernelTable::constant(kernel.a0()));
  for (int n = 1; n <= max_order; ++n) {
    const double cell = cfg.dt * static_cast<double>(cfg.stride(n));
    const auto cells = static_cast<std::size_t>(std::llround(T / cell));
    out.push_back(GridKernelTable::tabulate(kernel, n, cell, cells, cfg.workers));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared sampling pass

namespace {

struct PathValues {
  double weight = 1.0, f = 0.0, clark = 0.0;
  std::vector<double> integrals;
  bool truncated = false;
};

}  // namespace

ChaosSamples sample_chaos(const DomainModel& model, const BoundaryFunction& phi, double u,
                          std::span<const GridKernelTable> tables, const MCConfig& cfg, bool with_clark) {
  if (cfg.n_samples < 2) throw std::invalid_argument("mc: n_samples must be at least 2");
  if (cfg.sampler == Measure::Qt) throw std::invalid_argument("mc: sampler must be P or Q");
  for (const auto& t : tables)
    if (t.order() > kMaxChaosOrder) throw std::invalid_argument("chaos: unsupported order");
  const double T = simulation_horizon(model, u, cfg);
  const TimeGrid grid = TimeGrid::covering(cfg.dt, T);
  const RngStream rng(cfg.seed, cfg.stream);
  auto values = parallel_map<PathValues>(cfg.n_samples, cfg.workers, [&](std::size_t k) {
    SampleRng r = rng.sample(k);
    const PathSample path =
        cfg.sampler == Measure::P ? simulate_P(model, u, grid, r) : simulate_Q(model, u, grid, r);
    const std::vector<double> dwt = increments_w_tilde(model, path);
    PathValues v;
    v.weight = path.weight;
    v.f = stopped_functional(model, phi, path);
    v.truncated = !path.exited();
    if (with_clark) v.clark = clark_sum(model, phi, path, dwt);
    v.integrals.reserve(tables.size());
    for (const auto& t : tables) v.integrals.push_back(integral_with(model, path, dwt, t));
    return v;
  });
  ChaosSamples s;
  s.horizon = T;
  s.integrals.assign(tables.size(), std::vector<double>(cfg.n_samples));
  s.weight.resize(cfg.n_samples);
  s.f.resize(cfg.n_samples);
  s.clark.resize(cfg.n_samples);
  for (std::size_t k = 0; k < cfg.n_samples; ++k) {
    s.weight[k] = values[k].weight;
    s.f[k] = values[k].f;
    s.clark[k] = values[k].clark;
    for (std::size_t n = 0; n < tables.size(); ++n) s.integrals[n][k] = values[k].integrals[n];
    if (values[k].truncated) ++s.truncated;
  }
  return s;
}

MCEstimate residual_estimate(const ChaosSamples& s, int max_order) {
  if (max_order < 0 || static_cast<std::size_t>(max_order) >= s.integrals.size())
    throw std::invalid_argument("residual: order not sampled");
  std::vector<double> x(s.f.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    double r = s.f[k];
    for (int n = 0; n <= max_order; ++n) r -= s.integrals[static_cast<std::size_t>(n)][k];
    x[k] = s.weight[k] * r * r;
  }
  return estimate(x);
}

MCEstimate product_estimate(const ChaosSamples& s, int m, int n) {
  const auto nm = static_cast<std::size_t>(m), nn = static_cast<std::size_t>(n);
  if (m < 0 || n < 0 || nm >= s.integrals.size() || nn >= s.integrals.size())
    throw std::invalid_argument("product: order not sampled");
  std::vector<double> x(s.f.size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = s.weight[k] * s.integrals[nm][k] * s.integrals[nn][k];
  return estimate(x);
}

MCEstimate clark_estimate(const ChaosSamples& s, double a0) {
  std::vector<double> x(s.f.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = s.f[k] - a0 - s.clark[k];
    x[k] = s.weight[k] * r * r;
  }
  return estimate(x);
}

MCEstimate second_moment_estimate(const ChaosSamples& s) {
  std::vector<double> x(s.f.size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = s.weight[k] * s.f[k] * s.f[k];
  return estimate(x);
}

MCEstimate expansion_partial_sum(const ChaosKernel& kernel, int max_order, const MCConfig& cfg) {
  const auto tables = chaos_tables(kernel, max_order, cfg);
  const ChaosSamples s = sample_chaos(kernel.model(), kernel.phi(), kernel.base_point(), tables, cfg, false);
  return residual_estimate(s, max_order);
}

MCEstimate orthogonality_estimate(const DomainModel& model, const BoundaryFunction& phi, double u,
                                  const GridKernelTable& a_m, const GridKernelTable& a_n, const MCConfig& cfg) {
  if (a_m.order() == a_n.order()) throw std::invalid_argument("orthogonality: orders must differ");
  const GridKernelTable tables[2] = {a_m, a_n};
  const ChaosSamples s = sample_chaos(model, phi, u, tables, cfg, false);
  return product_estimate(s, 0, 1);
}

MCEstimate clark_residual(const DomainModel& model, double u, const BoundaryFunction& phi, const MCConfig& cfg) {
  const ChaosSamples s = sample_chaos(model, phi, u, {}, cfg, true);
  return clark_estimate(s, op_T_tilde(model, phi, u));
}

// ---------------------------------------------------------------------------
// Conditioned identity

namespace {

struct Eq1Path {
  double value = 0.0;
  bool failed = false;
  std::size_t clamps = 0;
};

double eq1_rhs(const KilledSemigroup& ops, double u, double t, const GridFunction& psi,
               const std::function<double(double)>& g, std::size_t nodes) {
  const GaussRule rule = gauss_legendre(nodes, 0.0, t);
  double sum = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double s = rule.nodes[k];
    const double gs = g(s);
    if (gs == 0.0) continue;
    const GridFunction h = ops.alpha_grad_tilde(ops.build(t - s), psi);
    // alpha(s,u) T~^k_s h (u) = T^k_s h (u)
    sum += rule.weights[k] * ops.apply_at(s, h, u) * gs;
  }
  return sum / ops.model().alpha(t, u);
}

}  // namespace

Eq1Result eq1_check(const KilledSemigroup& ops, double u, double t, const std::function<double(double)>& psi,
                    const std::function<double(double)>& g, const MCConfig& cfg, std::size_t time_nodes) {
  if (cfg.n_samples < 2) throw std::invalid_argument("mc: n_samples must be at least 2");
  const DomainModel& model = ops.model();
  const TimeGrid grid(cfg.dt, conditioning_steps(TimeGrid::covering(cfg.dt, t), t));
  const RngStream rng(cfg.seed, cfg.stream);
  const auto paths = parallel_map<Eq1Path>(cfg.n_samples, cfg.workers, [&](std::size_t k) {
    SampleRng r = rng.sample(k);
    const PathSample path = simulate_Qt(model, u, t, grid, r);
    Eq1Path out;
    out.clamps = path.clamp_events;
    if (path.exited()) {
      out.failed = true;
      return out;
    }
    const std::vector<double> dw = increments_hat(model, path, t);
    double integral = 0.0;
    for (std::size_t i = 0; i < dw.size(); ++i) integral += g(grid.time(i)) * dw[i];
    out.value = psi(path.positions.back()) * integral;
    return out;
  });
  Eq1Result res;
  std::vector<double> x;
  x.reserve(paths.size());
  for (const auto& p : paths) {
    res.clamp_events += p.clamps;
    if (p.failed) {
      ++res.failed_paths;
      continue;
    }
    x.push_back(p.value);
  }
  res.lhs = estimate(x);
  const GridFunction psi_grid = GridFunction::from(ops.grid(), psi);
  res.rhs = eq1_rhs(ops, u, t, psi_grid, g, time_nodes);
  const double finer = eq1_rhs(ops, u, t, psi_grid, g, time_nodes + time_nodes / 2);
  res.rhs_quadrature_error = std::abs(finer - res.rhs);
  return res;
}

}  // namespace kvchaos
