#include <doctest.h>

#include <cmath>

#include "kvchaos/estimate.hpp"
#include "kvchaos/parallel.hpp"
#include "kvchaos/path_sim.hpp"
#include "kvchaos/semigroup.hpp"

using namespace kvchaos;

namespace {

const IntervalDomain& scenario() {
  static const IntervalDomain m(0.0, 1.0, BoundaryWeight(0.2), BoundaryWeight(0.8));
  return m;
}

template <class Fn>
MCEstimate mc(std::size_t n, std::uint64_t stream, Fn&& fn) {
  const RngStream rng(777, stream);
  const auto v = parallel_map<double>(n, 0, [&](std::size_t k) {
    SampleRng g = rng.sample(k);
    return fn(g);
  });
  return estimate(v);
}

bool within(const MCEstimate& e, double oracle, double k = 3.0) { return std::abs(e.mean - oracle) <= k * e.std_error; }

}  // namespace

TEST_SUITE("path_sim") {
  TEST_CASE("time grid and measure names") {
    const TimeGrid g = TimeGrid::covering(1e-3, 0.25);
    CHECK(g.steps == 250);
    CHECK(g.horizon() == doctest::Approx(0.25));
    CHECK_THROWS_AS(TimeGrid(0.0, 3), std::invalid_argument);
    CHECK(conditioning_steps(g, 0.1) == 100);
    CHECK_THROWS_AS(conditioning_steps(g, 0.10005), std::invalid_argument);
    CHECK_THROWS_AS(conditioning_steps(g, 0.3), std::invalid_argument);
    for (Measure m : {Measure::P, Measure::Q, Measure::Qt}) CHECK(measure_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(measure_from_string("R"), std::invalid_argument);
  }

  TEST_CASE("zero noise never moves") {
    ZeroNoise z;
    const HalfLineDomain hl(BoundaryWeight(0.4));
    const PathSample p = simulate_P(scenario(), 0.5, TimeGrid(1e-3, 500), z);
    CHECK_FALSE(p.exited());
    CHECK(p.positions.size() == 501);
    for (double x : p.positions) CHECK(x == 0.5);
    const PathSample q = simulate_Q(hl, 0.3, TimeGrid(1e-3, 200), z);
    for (double x : q.positions) CHECK(x == 0.3);
    CHECK(q.weight == 1.0);
  }

  TEST_CASE("stopped path layout") {
    const RngStream rng(5);
    for (std::size_t k = 0; k < 200; ++k) {
      SampleRng g = rng.sample(k);
      const PathSample p = simulate_Q(scenario(), 0.5, TimeGrid(1e-3, 3000), g);
      if (!p.exited()) continue;
      CHECK(p.positions.size() == *p.exit_index + 1);
      for (std::size_t i = 0; i < *p.exit_index; ++i) CHECK(scenario().is_interior(p.positions[i]));
      CHECK(p.end_position() == scenario().boundary_points()[p.exit_boundary]);
      const std::size_t e = *p.exit_index;
      CHECK(p.exit_time > p.grid.time(e - 1));
      CHECK(p.exit_time <= p.grid.time(e));
      CHECK(p.step_duration(e - 1) > 0.0);
      CHECK(p.step_duration(e - 1) <= p.grid.dt);
    }
  }

  TEST_CASE("P exit sides follow the harmonic measure") {
    const double u = 0.3;
    const TimeGrid grid(1e-3, 6000);
    const MCEstimate e = mc(20000, 1, [&](SampleRng& g) {
      const PathSample p = simulate_P(scenario(), u, grid, g);
      return p.exit_boundary == 1 ? 1.0 : 0.0;
    });
    CHECK(within(e, scenario().harmonic_measure(u)[1].mass));
  }

  TEST_CASE("half-line survival matches the reflection principle") {
    const HalfLineDomain hl(BoundaryWeight(0.7));
    const TimeGrid grid(1e-3, 1000);
    const MCEstimate e = mc(40000, 2, [&](SampleRng& g) { return simulate_P(hl, 1.0, grid, g).exited() ? 0.0 : 1.0; });
    CHECK(within(e, 0.682689492137086));
  }

  TEST_CASE("Q tilts exit sides by rho over beta") {
    const double u = 0.3;
    const TimeGrid grid(1e-3, 6000);
    const MCEstimate e = mc(20000, 3, [&](SampleRng& g) {
      return simulate_Q(scenario(), u, grid, g).exit_boundary == 1 ? 1.0 : 0.0;
    });
    CHECK(within(e, 0.8 * 0.3 / scenario().beta(u)));
    const MCEstimate w = mc(20000, 4, [&](SampleRng& g) {
      const PathSample p = simulate_P(scenario(), u, grid, g);
      return p.weight * (p.exit_boundary == 1 ? 1.0 : 0.0);
    });
    CHECK(std::abs(w.mean - e.mean) <= 3.0 * combined_stderr(w, e));
  }

  TEST_CASE("P weights reproduce Q expectations") {
    const TimeGrid grid(1e-3, 1000);
    const double t = 0.1;
    auto survives = [&](const PathSample& p) { return p.exit_time > t ? 1.0 : 0.0; };
    const MCEstimate pw = mc(20000, 5, [&](SampleRng& g) {
      const PathSample p = simulate_P(scenario(), 0.5, grid, g);
      return p.weight * survives(p);
    });
    const MCEstimate q = mc(20000, 6, [&](SampleRng& g) { return survives(simulate_Q(scenario(), 0.5, grid, g)); });
    CHECK(std::abs(pw.mean - q.mean) <= 3.0 * combined_stderr(pw, q));
    const MCEstimate w = mc(20000, 7, [&](SampleRng& g) { return simulate_P(scenario(), 0.5, grid, g).weight; });
    CHECK(within(w, 1.0));
  }

  TEST_CASE("Q equals P on the half-line path for path") {
    const HalfLineDomain hl(BoundaryWeight(0.4));
    const RngStream rng(99);
    for (std::size_t k = 0; k < 50; ++k) {
      SampleRng a = rng.sample(k), b = rng.sample(k);
      const PathSample p = simulate_P(hl, 0.2, TimeGrid(1e-3, 400), a);
      const PathSample q = simulate_Q(hl, 0.2, TimeGrid(1e-3, 400), b);
      CHECK(p.positions == q.positions);
      CHECK(p.exit_time == q.exit_time);
      CHECK(p.weight == q.weight);
    }
  }

  TEST_CASE("conditioned paths survive and have the right marginal") {
    const auto m = std::make_shared<IntervalDomain>(0.0, 1.0, BoundaryWeight(0.2), BoundaryWeight(0.8));
    const double t = 0.3;
    const TimeGrid grid(1e-3, 300);
    const RngStream rng(31);
    const auto paths = parallel_map<PathSample>(4000, 0, [&](std::size_t k) {
      SampleRng g = rng.sample(k);
      return simulate_Qt(*m, 0.3, t, grid, g);
    });
    std::size_t failures = 0;
    std::vector<double> ends;
    for (const auto& p : paths) {
      CHECK(p.measure == Measure::Qt);
      if (p.exited()) {
        ++failures;
        continue;
      }
      CHECK(p.positions.size() == 301);
      ends.push_back(p.end_position());
    }
    CHECK(failures <= 4);
    const KilledSemigroup ops(m, QuadratureGrid::for_model(*m, GridSettings{}, 0.3));
    const auto x = GridFunction::from(ops.grid(), [](double v) { return v; });
    CHECK(within(estimate(ends), ops.apply_tilde_at(t, x, 0.3)));
    SampleRng g(1, 1, 1);
    CHECK_THROWS_AS(simulate_Qt(*m, 0.3, 0.45, grid, g), std::invalid_argument);
  }

  TEST_CASE("w~ increments") {
    const HalfLineDomain hl(BoundaryWeight(0.5));
    const RngStream rng(17);
    for (std::size_t k = 0; k < 20; ++k) {
      SampleRng g = rng.sample(k);
      const PathSample p = simulate_P(hl, 0.5, TimeGrid(1e-3, 300), g);
      const auto d = increments_w_tilde(hl, p);
      REQUIRE(d.size() == p.last_index());
      for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == p.positions[i + 1] - p.positions[i]);
    }
    // Quadratic variation of the stopped martingale up to time 1.
    const TimeGrid grid(1e-3, 1000);
    std::vector<double> qv, first;
    const auto res = parallel_map<std::array<double, 3>>(4000, 0, [&](std::size_t k) {
      SampleRng g = RngStream(18).sample(k);
      const PathSample p = simulate_Q(scenario(), 0.5, grid, g);
      const auto d = increments_w_tilde(scenario(), p);
      double s = 0.0;
      for (double x : d) s += x * x;
      return std::array<double, 3>{s, std::min(p.exit_time, 1.0), d.empty() ? 0.0 : d[0]};
    });
    for (const auto& r : res) qv.push_back(r[0] - r[1]), first.push_back(r[2]);
    CHECK(within(estimate(qv), 0.0));
    CHECK(within(estimate(first), 0.0));
  }

  TEST_CASE("hat increments under the conditioned sampler") {
    const double t = 0.2;
    const TimeGrid grid(1e-3, 200);
    const auto res = parallel_map<std::vector<double>>(2000, 0, [&](std::size_t k) {
      SampleRng g = RngStream(41).sample(k);
      const PathSample p = simulate_Qt(scenario(), 0.5, t, grid, g);
      if (p.exited()) return std::vector<double>{};
      return increments_hat(scenario(), p, t);
    });
    std::vector<double> z, a, b;
    for (const auto& d : res) {
      if (d.empty()) continue;
      CHECK(d.size() == 200);
      for (std::size_t i : {0, 50, 120, 190}) {
        z.push_back(d[i] / std::sqrt(grid.dt));
        a.push_back(d[i]);
        b.push_back(d[i + 1]);
      }
    }
    const MCEstimate e = estimate(z);
    CHECK(within(e, 0.0));
    double m2 = 0.0;
    for (double x : z) m2 += x * x;
    m2 /= static_cast<double>(z.size());
    CHECK(std::abs(m2 - 1.0) <= 3.0 * std::sqrt(2.0 / static_cast<double>(z.size())));
    CHECK(ks_test_standard_normal(z).p_value > 0.01);
    CHECK(std::abs(sample_correlation(a, b)) < 3.0 / std::sqrt(static_cast<double>(a.size())));
  }

  TEST_CASE("hat increments exclude times at or after t") {
    ZeroNoise z;
    const PathSample p = simulate_P(scenario(), 0.5, TimeGrid(1e-2, 50), z);
    CHECK(increments_hat(scenario(), p, 0.2).size() == 20);
  }

  TEST_CASE("paths do not depend on the worker count") {
    auto run = [&](std::size_t workers) {
      return parallel_map<PathSample>(100, workers, [&](std::size_t k) {
        SampleRng g = RngStream(3, 9).sample(k);
        return simulate_Q(scenario(), 0.4, TimeGrid(1e-3, 500), g);
      });
    };
    const auto a = run(1), b = run(3);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].positions == b[k].positions);
      CHECK(a[k].exit_time == b[k].exit_time);
    }
  }
}
