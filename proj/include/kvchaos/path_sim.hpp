#pragma once
// Euler paths under P_u, Q_u and Q_{t,u} on a uniform time grid.
//
// A path is stopped at its first exit: positions[exit_index] is the boundary
// point reached and nothing is stored after it. A crossing inside a step is
// detected either directly (the Euler position left the domain) or through
// the Brownian-bridge crossing probability exp(-2 d_0 d_1 / dt).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "kvchaos/domain.hpp"

namespace kvchaos {

struct TimeGrid {
  double dt = 1e-4;
  std::size_t steps = 0;

  TimeGrid() = default;
  TimeGrid(double dt, std::size_t steps);
  /// Smallest grid with step dt reaching `horizon`.
  static TimeGrid covering(double dt, double horizon);

  double horizon() const { return dt * static_cast<double>(steps); }
  double time(std::size_t i) const { return dt * static_cast<double>(i); }
};

enum class Measure { P, Q, Qt };
std::string to_string(Measure m);
Measure measure_from_string(const std::string& s);

struct PathSample {
  TimeGrid grid;
  std::vector<double> positions;
  std::optional<std::size_t> exit_index;
  double exit_time = std::numeric_limits<double>::infinity();
  /// Index into DomainModel::boundary_points(), or -1.
  int exit_boundary = -1;
  Measure measure = Measure::Q;
  /// Conditioning horizon t for Q_{t,u} paths.
  double conditioning_time = 0.0;
  /// Density with respect to Q_u: 1 for Q paths, rho(w(tau))/beta(u) for P paths.
  double weight = 1.0;
  std::size_t clamp_events = 0;

  bool exited() const { return exit_index.has_value(); }
  /// Index of the last stored position of the stopped path.
  std::size_t last_index() const { return exit_index ? *exit_index : positions.size() - 1; }
  double end_position() const { return positions[last_index()]; }
  /// Duration of step i inside the stopped path (the exit step is partial).
  double step_duration(std::size_t i) const;
};

template <class N>
concept NoiseSource = requires(N& n) {
  { n.normal() } -> std::convertible_to<double>;
  { n.uniform() } -> std::convertible_to<double>;
};

/// Random stream of one sample: a Mersenne twister seeded from
/// (master seed, sample index, stream tag) only.
class SampleRng {
 public:
  SampleRng(std::uint64_t seed, std::uint64_t sample, std::uint64_t stream);
  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  SampleRng sample(std::uint64_t k) const { return SampleRng(seed_, k, stream_); }
  RngStream substream(std::uint64_t tag) const { return RngStream(seed_, stream_ * 1000003ULL + tag + 1); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

/// Noise that is identically zero; the uniform draw never accepts a crossing.
struct ZeroNoise {
  double normal() { return 0.0; }
  double uniform() { return 1.0; }
};

struct SimulationOptions {
  bool bridge_correction = true;
};

namespace detail {

struct Boundaries {
  double lo, hi;
  bool has_lo, has_hi;
  explicit Boundaries(const DomainModel& m);
  double distance(double x) const;
};

void begin_path(PathSample& p, const DomainModel& model, double u, const TimeGrid& grid, Measure measure);

/// Advance one step from x with the given drift; returns true on exit and
/// finalizes the exit fields of the path.
template <class N>
bool step(PathSample& p, const Boundaries& b, std::size_t i, double x, double drift, N& noise, bool bridge) {
  const double dt = p.grid.dt;
  const double y = x + drift * dt + std::sqrt(dt) * noise.normal();
  auto finish = [&](int side, double frac) {
    p.positions.push_back(side == 0 ? b.lo : b.hi);
    p.exit_index = i + 1;
    p.exit_time = p.grid.time(i) + frac * dt;
    p.exit_boundary = (side == 0 || !b.has_lo) ? 0 : 1;
    return true;
  };
  if (b.has_lo && y <= b.lo) return finish(0, (x - b.lo) / (x - y));
  if (b.has_hi && y >= b.hi) return finish(1, (b.hi - x) / (y - x));
  if (bridge) {
    double p_lo = 0.0, p_hi = 0.0;
    constexpr double kMaxExponent = 40.0;
    if (b.has_lo) {
      const double e = 2.0 * (x - b.lo) * (y - b.lo) / dt;
      if (e < kMaxExponent) p_lo = std::exp(-e);
    }
    if (b.has_hi) {
      const double e = 2.0 * (b.hi - x) * (b.hi - y) / dt;
      if (e < kMaxExponent) p_hi = std::exp(-e);
    }
    if (p_lo + p_hi > 0.0) {
      const double v = noise.uniform();
      if (v < p_lo) return finish(0, 0.5);
      if (v < p_lo + p_hi) return finish(1, 0.5);
    }
  }
  p.positions.push_back(y);
  return false;
}

void finish_weight(PathSample& p, const DomainModel& model, double u);

}  // namespace detail

/// Standard Wiener process from u, weighted to Q_u.
template <NoiseSource N>
PathSample simulate_P(const DomainModel& model, double u, const TimeGrid& grid, N& noise,
                      SimulationOptions opts = {}) {
  PathSample p;
  detail::begin_path(p, model, u, grid, Measure::P);
  const detail::Boundaries b(model);
  for (std::size_t i = 0; i < grid.steps; ++i) {
    if (detail::step(p, b, i, p.positions.back(), 0.0, noise, opts.bridge_correction)) break;
  }
  detail::finish_weight(p, model, u);
  return p;
}

/// Euler scheme for dw = grad log beta(w) ds + dw~.
template <NoiseSource N>
PathSample simulate_Q(const DomainModel& model, double u, const TimeGrid& grid, N& noise,
                      SimulationOptions opts = {}) {
  PathSample p;
  detail::begin_path(p, model, u, grid, Measure::Q);
  const detail::Boundaries b(model);
  for (std::size_t i = 0; i < grid.steps; ++i) {
    const double x = p.positions.back();
    if (detail::step(p, b, i, x, model.grad_log_beta(x), noise, opts.bridge_correction)) break;
  }
  return p;
}

/// Number of grid steps covering [0,t); t must lie within one part in 1e9 of a grid time.
std::size_t conditioning_steps(const TimeGrid& grid, double t);

/// Euler scheme for dw = (grad log alpha(t-s,w) + grad log beta(w)) ds + dw^_t on
/// [0,t]. Inside a grid step the scheme sub-steps so that each sub-step's
/// standard deviation stays below distance/5; the drift is clamped to
/// |drift| h <= distance/2. Exits are counted as failures.
template <NoiseSource N>
PathSample simulate_Qt(const DomainModel& model, double u, double t, const TimeGrid& grid, N& noise) {
  constexpr double kSigmas = 5.0;
  constexpr double kMinFraction = 1e-6;
  const std::size_t n = conditioning_steps(grid, t);
  PathSample p;
  detail::begin_path(p, model, u, TimeGrid(grid.dt, n), Measure::Qt);
  p.conditioning_time = t;
  const detail::Boundaries b(model);
  for (std::size_t i = 0; i < n; ++i) {
    double x = p.positions.back();
    double s = grid.time(i);
    const double end = grid.time(i + 1);
    while (end - s > 0.0) {
      const double d = b.distance(x);
      double h = std::min(end - s, (d / kSigmas) * (d / kSigmas));
      h = std::max(h, std::min(end - s, kMinFraction * grid.dt));
      double drift = model.grad_log_alpha(t - s, x) + model.grad_log_beta(x);
      const double cap = 0.5 * d / h;
      if (!(std::abs(drift) <= cap)) {
        drift = std::copysign(cap, drift);
        ++p.clamp_events;
      }
      const double y = x + drift * h + std::sqrt(h) * noise.normal();
      if (!(b.distance(y) > 0.0)) {
        const bool low = b.has_lo && y <= b.lo;
        p.positions.push_back(low ? b.lo : b.hi);
        p.exit_index = i + 1;
        p.exit_time = s + h;
        p.exit_boundary = (low || !b.has_lo) ? 0 : 1;
        return p;
      }
      x = y;
      s = (h == end - s) ? end : s + h;
    }
    p.positions.push_back(x);
  }
  return p;
}

/// dw~_i = dw_i - grad log beta(w_i) * duration_i for the steps of the stopped path.
std::vector<double> increments_w_tilde(const DomainModel& model, const PathSample& path);

/// dw^~_t,i = dw~_i - grad log alpha(t - s_i, w_i) * duration_i for s_i < t.
std::vector<double> increments_hat(const DomainModel& model, const PathSample& path, double t);

}  // namespace kvchaos
