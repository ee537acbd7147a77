#include "kvchaos/path_sim.hpp"

#include <cmath>
#include <stdexcept>

namespace kvchaos {

TimeGrid::TimeGrid(double dt_, std::size_t steps_) : dt(dt_), steps(steps_) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("TimeGrid: dt must be positive");
}

TimeGrid TimeGrid::covering(double dt, double horizon) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("TimeGrid: bad horizon");
  if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
  return TimeGrid(dt, static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9)));
}

std::string to_string(Measure m) {
  switch (m) {
    case Measure::P: return "P";
    case Measure::Q: return "Q";
    case Measure::Qt: return "Qt";
  }
  return "?";
}

Measure measure_from_string(const std::string& s) {
  if (s == "P") return Measure::P;
  if (s == "Q") return Measure::Q;
  if (s == "Qt") return Measure::Qt;
  throw std::invalid_argument("unknown measure '" + s + "'");
}

double PathSample::step_duration(std::size_t i) const {
  if (exit_index && i + 1 == *exit_index) return exit_time - grid.time(i);
  return grid.dt;
}

SampleRng::SampleRng(std::uint64_t seed, std::uint64_t sample, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(sample >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  engine_.seed(seq);
}

namespace detail {

Boundaries::Boundaries(const DomainModel& m)
    : lo(m.lower()), hi(m.upper()), has_lo(std::isfinite(m.lower())), has_hi(std::isfinite(m.upper())) {}

double Boundaries::distance(double x) const {
  double d = std::numeric_limits<double>::infinity();
  if (has_lo) d = std::min(d, x - lo);
  if (has_hi) d = std::min(d, hi - x);
  return d;
}

void begin_path(PathSample& p, const DomainModel& model, double u, const TimeGrid& grid, Measure measure) {
  if (!model.is_interior(u)) throw std::domain_error("simulate: start point must be interior");
  p.grid = grid;
  p.measure = measure;
  p.positions.reserve(std::min<std::size_t>(grid.steps + 1, 1 << 16));
  p.positions.push_back(u);
}

void finish_weight(PathSample& p, const DomainModel& model, double u) {
  // Exited paths carry rho(w(tau))/beta(u); paths still inside at the horizon
  // carry the conditional expectation beta(w(T))/beta(u) of that density.
  p.weight = model.beta(p.end_position()) / model.beta(u);
}

}  // namespace detail

std::size_t conditioning_steps(const TimeGrid& grid, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("simulate_Qt: t must be positive");
  const double r = t / grid.dt;
  const double n = std::round(r);
  if (std::abs(r - n) > 1e-9 * std::max(1.0, r)) throw std::invalid_argument("simulate_Qt: t must be a grid time");
  if (n > static_cast<double>(grid.steps)) throw std::invalid_argument("simulate_Qt: t exceeds the grid horizon");
  return static_cast<std::size_t>(n);
}

std::vector<double> increments_w_tilde(const DomainModel& model, const PathSample& path) {
  const std::size_t last = path.last_index();
  std::vector<double> out(last);
  for (std::size_t i = 0; i < last; ++i) {
    const double x = path.positions[i];
    out[i] = path.positions[i + 1] - x - model.grad_log_beta(x) * path.step_duration(i);
  }
  return out;
}

std::vector<double> increments_hat(const DomainModel& model, const PathSample& path, double t) {
  if (t > path.grid.horizon() * (1.0 + 1e-12)) throw std::invalid_argument("increments_hat: t beyond the path horizon");
  std::vector<double> out = increments_w_tilde(model, path);
  std::size_t n = 0;
  while (n < out.size() && path.grid.time(n) < t) ++n;
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] -= model.grad_log_alpha(t - path.grid.time(i), path.positions[i]) * path.step_duration(i);
  }
  return out;
}

}  // namespace kvchaos
