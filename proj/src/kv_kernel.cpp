#include "kvchaos/kv_kernel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kvchaos/simd.hpp"

namespace kvchaos {

ChaosKernel::ChaosKernel(std::shared_ptr<const KilledSemigroup> ops, BoundaryFunction phi, double base_point)
    : ops_(std::move(ops)), phi_(std::move(phi)), u_(base_point) {
  if (!ops_) throw std::invalid_argument("ChaosKernel: null operator");
  const DomainModel& m = ops_->model();
  if (!m.is_interior(u_)) throw std::domain_error("ChaosKernel: base point must be interior");
  a0_ = op_T_tilde(m, phi_, u_);
  integrand_ = grad_op_T_tilde_on(m, phi_, ops_->grid());
}

GridFunction ChaosKernel::stage(std::span<const double> increments) const {
  if (increments.empty()) return integrand_;
  std::vector<double> key(increments.begin(), increments.end());
  {
    std::lock_guard lock(mutex_);
    if (auto it = stages_.find(key); it != stages_.end()) return it->second;
  }
  const GridFunction inner = stage(increments.subspan(1));
  GridFunction h = ops_->alpha_grad_tilde(increments.front(), inner);
  std::lock_guard lock(mutex_);
  return stages_.emplace(std::move(key), std::move(h)).first->second;
}

const OperatorRow& ChaosKernel::base_row(double t) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = rows_.find(t); it != rows_.end()) return it->second;
  }
  OperatorRow r = ops_->row(t, u_);
  std::lock_guard lock(mutex_);
  return rows_.emplace(t, std::move(r)).first->second;
}

double ChaosKernel::close(double t1, const GridFunction& h, double horizon) const {
  const OperatorRow& r = base_row(t1);
  const double tk = simd::dot(r.value, h.values) / r.beta;
  return tk / model().alpha(horizon, u_);
}

double ChaosKernel::evaluate(std::span<const double> times) const {
  if (times.empty()) return a0_;
  double prev = 0.0;
  std::vector<double> increments;
  increments.reserve(times.size() - 1);
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > prev)) throw std::invalid_argument("kv kernel: times must be positive and strictly increasing");
    if (i > 0) increments.push_back(times[i] - prev);
    prev = times[i];
  }
  const GridFunction h = stage(increments);
  return close(times.front(), h, times.back());
}

std::size_t ChaosKernel::cached_stages() const {
  std::lock_guard lock(mutex_);
  return stages_.size();
}

// ---------------------------------------------------------------------------

SimplexQuadrature SimplexQuadrature::for_base_point(const DomainModel& model, double u, std::size_t nodes_per_axis,
                                                    double alpha_cutoff, double max_horizon) {
  if (nodes_per_axis == 0) throw std::invalid_argument("simplex quadrature: need nodes");
  SimplexQuadrature q;
  q.nodes_per_axis = nodes_per_axis;
  double hi = 0.125;
  while (hi < max_horizon && model.alpha(hi, u) >= alpha_cutoff) hi *= 2.0;
  if (hi >= max_horizon) {
    q.horizon = max_horizon;
  } else {
    double lo = 0.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (model.alpha(mid, u) >= alpha_cutoff ? lo : hi) = mid;
    }
    q.horizon = hi;
  }
  GaussRule rule = gauss_legendre(nodes_per_axis, 0.0, q.horizon);
  q.nodes = std::move(rule.nodes);
  q.weights = std::move(rule.weights);
  q.decay_rate = model.principal_eigenvalue();
  q.decay_constant = 1.0;
  constexpr int kSamples = 400;
  for (int i = 1; i <= kSamples; ++i) {
    const double s = q.horizon * i / kSamples;
    q.decay_constant = std::max(q.decay_constant, model.alpha(s, u) * std::exp(q.decay_rate * s));
  }
  return q;
}

namespace {

template <class Visit>
void for_each_node(const SimplexQuadrature& quad, int order, Visit&& visit) {
  const std::size_t q = quad.nodes_per_axis;
  std::vector<std::size_t> idx(static_cast<std::size_t>(order), 0);
  std::vector<double> times(static_cast<std::size_t>(order));
  while (true) {
    double t = 0.0;
    double w = 1.0;
    for (int k = 0; k < order; ++k) {
      t += quad.nodes[idx[k]];
      w *= quad.weights[idx[k]];
      times[k] = t;
    }
    visit(std::span<const double>(times), w);
    // Odometer with the first axis fastest, so stage suffixes repeat.
    int k = 0;
    for (; k < order; ++k) {
      if (++idx[k] < q) break;
      idx[k] = 0;
    }
    if (k == order) break;
  }
}

}  // namespace

ParsevalTerm parseval_term(const ChaosKernel& kernel, int order, const SimplexQuadrature& quad) {
  if (order < 0) throw std::invalid_argument("parseval_term: negative order");
  ParsevalTerm out;
  out.order = order;
  if (order == 0) {
    out.value = kernel.a0() * kernel.a0();
    out.max_abs_kernel = std::abs(kernel.a0());
    return out;
  }
  const double u = kernel.base_point();
  for_each_node(quad, order, [&](std::span<const double> times, double w) {
    const double a = kernel.evaluate(times);
    out.value += w * kernel.model().alpha(times.back(), u) * a * a;
    out.max_abs_kernel = std::max(out.max_abs_kernel, std::abs(a));
  });
  // \int_{t_n > T} alpha(t_n,u) dt_1..dt_n <= C e^{-lT} sum_{k<n} T^k / (k! l^{n-k})
  const double l = quad.decay_rate;
  const double T = quad.horizon;
  if (out.max_abs_kernel == 0.0) {
    out.tail_bound = 0.0;
  } else if (l <= 0.0) {
    out.tail_bound = std::numeric_limits<double>::infinity();
  } else {
    double sum = 0.0;
    double term = 1.0;  // T^k / k!
    for (int k = 0; k < order; ++k) {
      sum += term / std::pow(l, order - k);
      term *= T / (k + 1);
    }
    out.tail_bound = out.max_abs_kernel * out.max_abs_kernel * quad.decay_constant * std::exp(-l * T) * sum;
  }
  return out;
}

std::vector<std::vector<double>> kernel_table(const ChaosKernel& kernel, int order, const SimplexQuadrature& quad) {
  std::vector<std::vector<double>> rows;
  if (order == 0) {
    rows.push_back({kernel.a0()});
    return rows;
  }
  for_each_node(quad, order, [&](std::span<const double> times, double) {
    std::vector<double> row(times.begin(), times.end());
    row.push_back(kernel.evaluate(times));
    rows.push_back(std::move(row));
  });
  return rows;
}

double second_moment(const DomainModel& model, const BoundaryFunction& phi, double u) {
  BoundaryFunction sq = phi;
  for (double& v : sq.values) v *= v;
  return op_T_tilde(model, sq, u);
}

}  // namespace kvchaos
