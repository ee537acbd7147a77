#include <doctest.h>

#include <cmath>

#include "kvchaos/chaos_mc.hpp"

using namespace kvchaos;

namespace {

std::shared_ptr<const DomainModel> scenario() {
  return std::make_shared<IntervalDomain>(0.0, 1.0, BoundaryWeight(0.2), BoundaryWeight(0.8));
}

std::shared_ptr<const KilledSemigroup> make_ops(std::shared_ptr<const DomainModel> m, double u = 0.5) {
  return std::make_shared<KilledSemigroup>(m, QuadratureGrid::for_model(*m, GridSettings{}, u));
}

MCConfig small_config(std::size_t n) {
  MCConfig c;
  c.n_samples = n;
  c.dt = 1e-3;
  c.workers = 0;
  c.seed = 4242;
  return c;
}

std::vector<PathSample> some_paths(const DomainModel& m, std::size_t n, double dt, std::size_t steps) {
  std::vector<PathSample> out;
  const RngStream rng(8);
  for (std::size_t k = 0; k < n; ++k) {
    SampleRng g = rng.sample(k);
    out.push_back(simulate_Q(m, 0.5, TimeGrid(dt, steps), g));
  }
  return out;
}

}  // namespace

TEST_SUITE("chaos_mc") {
  TEST_CASE("simulation horizon") {
    const auto m = scenario();
    MCConfig c;
    const double T = simulation_horizon(*m, 0.5, c);
    CHECK(m->alpha(T, 0.5) < 1e-4);
    const double block = c.dt * 100.0;
    CHECK(std::abs(T / block - std::round(T / block)) <= 1e-9);
    c.horizon = 0.255;
    CHECK(simulation_horizon(*m, 0.5, c) == doctest::Approx(0.26).epsilon(1e-12));
  }

  TEST_CASE("order zero is the constant for every path") {
    const auto m = scenario();
    const GridKernelTable t = GridKernelTable::constant(0.8);
    for (const auto& p : some_paths(*m, 20, 1e-3, 2000)) {
      const IteratedIntegralValue v = iterated_integral(*m, p, t);
      CHECK(v.order == 0);
      CHECK(v.value == 0.8);
    }
  }

  TEST_CASE("unit first kernel telescopes to the w~ increment") {
    const auto m = scenario();
    const auto paths = some_paths(*m, 30, 1e-3, 2000);
    const auto one = GridKernelTable::from_function(1, 1e-3, 2000, [](std::span<const double>) { return 1.0; });
    for (const auto& p : paths) {
      const auto d = increments_w_tilde(*m, p);
      double s = 0.0;
      for (double x : d) s += x;
      CHECK(iterated_integral(*m, p, one).value == s);
    }
  }

  TEST_CASE("constant boundary data gives zero higher integrals") {
    const auto m = scenario();
    const ChaosKernel k(make_ops(m), BoundaryFunction{{1.7, 1.7}}, 0.5);
    MCConfig c = small_config(200);
    c.horizon = 0.5;
    const auto tables = chaos_tables(k, 3, c);
    for (int n = 1; n <= 3; ++n)
      for (double v : tables[n].values()) CHECK(v == 0.0);
    const ChaosSamples s = sample_chaos(*m, k.phi(), 0.5, tables, c, true);
    for (int n = 1; n <= 3; ++n)
      for (double v : s.integrals[n]) CHECK(v == 0.0);
    CHECK(residual_estimate(s, 3).mean == 0.0);
    CHECK(clark_estimate(s, k.a0()).mean == 0.0);
    CHECK(clark_residual(*m, 0.5, k.phi(), c).mean == 0.0);
  }

  TEST_CASE("linearity in the kernel") {
    const auto m = scenario();
    const auto paths = some_paths(*m, 20, 1e-3, 1000);
    auto fn = [](std::span<const double> t) {
      double s = 1.0;
      for (double x : t) s *= std::cos(3.0 * x) + 0.3;
      return s;
    };
    for (int n = 1; n <= 3; ++n) {
      const auto t = GridKernelTable::from_function(n, 1e-3 * (n == 1 ? 1 : n == 2 ? 10 : 100),
                                                    n == 1 ? 1000 : n == 2 ? 100 : 10, fn);
      const auto t2 = t.scaled(2.0);
      for (const auto& p : paths) CHECK(iterated_integral(*m, p, t2).value == 2.0 * iterated_integral(*m, p, t).value);
    }
  }

  TEST_CASE("only the stopped path matters") {
    const auto m = scenario();
    auto fn = [](std::span<const double> t) { return std::exp(-t.back()) + t.front(); };
    const auto t1 = GridKernelTable::from_function(1, 1e-3, 3000, fn);
    const auto t2 = GridKernelTable::from_function(2, 1e-2, 300, fn);
    for (auto p : some_paths(*m, 20, 1e-3, 3000)) {
      if (!p.exited()) continue;
      const double a = iterated_integral(*m, p, t1).value, b = iterated_integral(*m, p, t2).value;
      for (int k = 0; k < 50; ++k) p.positions.push_back(0.123 * k);
      CHECK(iterated_integral(*m, p, t1).value == a);
      CHECK(iterated_integral(*m, p, t2).value == b);
    }
  }

  TEST_CASE("argument errors") {
    const auto m = scenario();
    auto fn = [](std::span<const double>) { return 1.0; };
    CHECK_THROWS_AS(GridKernelTable::from_function(4, 1e-2, 10, fn), std::invalid_argument);
    const auto t = GridKernelTable::from_function(1, 1e-3, 100, fn);
    SampleRng g(1, 2, 3);
    const PathSample qt = simulate_Qt(*m, 0.5, 0.05, TimeGrid(1e-3, 100), g);
    CHECK_THROWS_AS(iterated_integral(*m, qt, t), std::invalid_argument);
    PathSample q = simulate_Q(*m, 0.5, TimeGrid(1e-3, 50), g);
    q.weight = 0.5;
    CHECK_THROWS_AS(iterated_integral(*m, q, t), std::invalid_argument);
    q.weight = 1.0;
    const auto short_table = GridKernelTable::from_function(1, 1e-3, 10, fn);
    CHECK_THROWS_AS(iterated_integral(*m, q, short_table), std::invalid_argument);
    const auto odd_cell = GridKernelTable::from_function(1, 1.5e-3, 100, fn);
    CHECK_THROWS_AS(iterated_integral(*m, q, odd_cell), std::invalid_argument);
    const ChaosKernel k(make_ops(m), BoundaryFunction{{0.0, 1.0}}, 0.5);
    CHECK_THROWS_AS(chaos_tables(k, 4, small_config(10)), std::invalid_argument);
    MCConfig c = small_config(1);
    CHECK_THROWS_AS(clark_residual(*m, 0.5, k.phi(), c), std::invalid_argument);
    c = small_config(10);
    c.sampler = Measure::Qt;
    CHECK_THROWS_AS(clark_residual(*m, 0.5, k.phi(), c), std::invalid_argument);
  }

  TEST_CASE("weighted P paths give the same integrals as Q paths in law") {
    const auto m = scenario();
    const ChaosKernel k(make_ops(m), BoundaryFunction{{0.0, 1.0}}, 0.5);
    MCConfig c = small_config(3000);
    const auto tables = chaos_tables(k, 1, c);
    const ChaosSamples q = sample_chaos(*m, k.phi(), 0.5, tables, c, false);
    c.sampler = Measure::P;
    c.stream = 1;
    const ChaosSamples p = sample_chaos(*m, k.phi(), 0.5, tables, c, false);
    const MCEstimate eq = product_estimate(q, 0, 1), ep = product_estimate(p, 0, 1);
    CHECK(std::abs(eq.mean - ep.mean) <= 3.0 * combined_stderr(eq, ep));
    const MCEstimate fq = second_moment_estimate(q), fp = second_moment_estimate(p);
    CHECK(std::abs(fq.mean - fp.mean) <= 3.0 * combined_stderr(fq, fp));
    CHECK(std::abs(fq.mean - 0.8) <= 3.0 * fq.std_error);
  }

  TEST_CASE("residuals follow the Parseval identity") {
    const auto m = scenario();
    const ChaosKernel k(make_ops(m), BoundaryFunction{{0.0, 1.0}}, 0.5);
    MCConfig c = small_config(2000);
    const auto tables = chaos_tables(k, 2, c);
    const ChaosSamples s = sample_chaos(*m, k.phi(), 0.5, tables, c, true);
    CHECK(s.truncated <= 5);
    const MCEstimate r0 = residual_estimate(s, 0), r1 = residual_estimate(s, 1), r2 = residual_estimate(s, 2);
    CHECK(r1.mean < r0.mean - 3.0 * combined_stderr(r0, r1));
    CHECK(r2.mean < r1.mean - 3.0 * combined_stderr(r1, r2));
    const SimplexQuadrature quad = SimplexQuadrature::for_base_point(*m, 0.5);
    const double p1 = parseval_term(k, 1, quad).value;
    // Discretization allowance at dt = 1e-3.
    CHECK(std::abs(r1.mean - (0.8 - 0.64 - p1)) <= 3.0 * r1.std_error + 5e-3);
    const MCEstimate i1 = product_estimate(s, 1, 1);
    CHECK(std::abs(i1.mean - p1) <= 3.0 * i1.std_error + 5e-3);
    const MCEstimate o01 = product_estimate(s, 0, 1);
    CHECK(std::abs(o01.mean) <= 3.0 * o01.std_error);
    CHECK(clark_estimate(s, k.a0()).mean < 0.01 * 0.8);
  }

  TEST_CASE("conditioned identity trivial cases") {
    const auto ops = make_ops(scenario());
    MCConfig c = small_config(500);
    const Eq1Result zero = eq1_check(*ops, 0.5, 0.2, [](double x) { return x; }, [](double) { return 0.0; }, c, 8);
    CHECK(zero.lhs.mean == 0.0);
    CHECK(zero.rhs == 0.0);
    const Eq1Result one = eq1_check(*ops, 0.5, 0.2, [](double) { return 1.0; }, [](double) { return 1.0; }, c, 8);
    CHECK(std::abs(one.rhs) <= 1e-8);
    CHECK(std::abs(one.lhs.mean) <= 3.0 * one.lhs.std_error);
    CHECK(one.failed_paths <= 1);
  }

  TEST_CASE("sampling is independent of the worker count") {
    const auto m = scenario();
    const ChaosKernel k(make_ops(m), BoundaryFunction{{0.0, 1.0}}, 0.5);
    MCConfig c = small_config(64);
    c.horizon = 0.3;
    const auto tables = chaos_tables(k, 2, c);
    c.workers = 1;
    const ChaosSamples a = sample_chaos(*m, k.phi(), 0.5, tables, c, true);
    c.workers = 3;
    const ChaosSamples b = sample_chaos(*m, k.phi(), 0.5, tables, c, true);
    CHECK(a.f == b.f);
    CHECK(a.clark == b.clark);
    CHECK(a.integrals == b.integrals);
  }
}
