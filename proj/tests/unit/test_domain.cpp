#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kvchaos/domain.hpp"
#include "kvchaos/quadrature.hpp"

using namespace kvchaos;

namespace {

IntervalDomain scenario() { return IntervalDomain(0.0, 1.0, BoundaryWeight(0.2), BoundaryWeight(0.8)); }

double free_kernel(double t, double z) { return std::exp(-z * z / (2.0 * t)) / std::sqrt(2.0 * std::numbers::pi * t); }

}  // namespace

TEST_SUITE("domain") {
  TEST_CASE("beta values") {
    CHECK(IntervalDomain(0, 1, BoundaryWeight(0.5), BoundaryWeight(0.5)).beta(0.3) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(scenario().beta(0.5) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(HalfLineDomain(BoundaryWeight(0.7)).beta(2.0) == 0.7);
    // Boundary points return the boundary weight; exterior points are rejected.
    CHECK(scenario().beta(0.0) == doctest::Approx(0.2));
    CHECK(scenario().beta(1.0) == doctest::Approx(0.8));
    CHECK_THROWS_AS(scenario().beta(1.5), std::domain_error);
    CHECK_THROWS_AS(HalfLineDomain(BoundaryWeight(0.7)).beta(-0.1), std::domain_error);
  }

  TEST_CASE("boundary weights must lie in (0,1)") {
    CHECK_THROWS_AS(BoundaryWeight(0.0), std::invalid_argument);
    CHECK_THROWS_AS(BoundaryWeight(1.0), std::invalid_argument);
    CHECK_THROWS_AS(BoundaryWeight(-0.3), std::invalid_argument);
    CHECK_NOTHROW(BoundaryWeight(0.999));
  }

  TEST_CASE("beta is harmonic and inside (0,1)") {
    const IntervalDomain m = scenario();
    const double h = 1.0 / 65.0;
    for (int k = 1; k <= 64; ++k) {
      const double x = k * h;
      CHECK(m.beta(x) > 0.0);
      CHECK(m.beta(x) < 1.0);
      if (k < 64) CHECK(std::abs(m.beta(x + h) - 2.0 * m.beta(x) + m.beta(x - h)) / (h * h) <= 1e-8);
    }
  }

  TEST_CASE("grad log beta") {
    CHECK(HalfLineDomain(BoundaryWeight(0.7)).grad_log_beta(3.0) == 0.0);
    CHECK(IntervalDomain(0, 1, BoundaryWeight(0.4), BoundaryWeight(0.4)).grad_log_beta(0.2) == 0.0);
    const IntervalDomain m = scenario();
    CHECK(m.grad_log_beta(0.5) == doctest::Approx(1.2).epsilon(1e-14));
    const double h = 1e-6;
    const double fd = (std::log(m.beta(0.5 + h)) - std::log(m.beta(0.5 - h))) / (2 * h);
    CHECK(m.grad_log_beta(0.5) == doctest::Approx(fd).epsilon(1e-8));
    CHECK_THROWS_AS(m.grad_log_beta(0.0), std::domain_error);
    CHECK_THROWS_AS(m.grad_log_beta(1.0), std::domain_error);
  }

  TEST_CASE("killed kernel symmetry, domination and errors") {
    const IntervalDomain m = scenario();
    const HalfLineDomain hl(BoundaryWeight(0.7));
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pos(0.001, 0.999), time(1e-4, 2.0);
    for (int k = 0; k < 200; ++k) {
      const double t = time(rng), x = pos(rng), y = pos(rng);
      CHECK(m.killed_kernel(t, x, y) == doctest::Approx(m.killed_kernel(t, y, x)).epsilon(1e-12));
      CHECK(m.killed_kernel(t, x, y) >= 0.0);
      CHECK(m.killed_kernel(t, x, y) <= free_kernel(t, x - y) * (1.0 + 1e-12) + 1e-300);
      CHECK(hl.killed_kernel(t, 3 * x, y) == doctest::Approx(hl.killed_kernel(t, y, 3 * x)).epsilon(1e-12));
      CHECK(hl.killed_kernel(t, 3 * x, y) <= free_kernel(t, 3 * x - y) + 1e-300);
    }
    CHECK_THROWS_AS(m.killed_kernel(0.0, 0.3, 0.4), std::domain_error);
    CHECK_THROWS_AS(m.killed_kernel(-1.0, 0.3, 0.4), std::domain_error);
  }

  TEST_CASE("half-line kernel is a single reflection") {
    const HalfLineDomain hl(BoundaryWeight(0.3));
    const double t = 0.7, x = 0.4, y = 1.3;
    CHECK(hl.killed_kernel(t, x, y) == doctest::Approx(free_kernel(t, x - y) - free_kernel(t, x + y)).epsilon(1e-14));
  }

  TEST_CASE("image and eigen representations agree across the switch") {
    const IntervalDomain m = scenario();
    for (double t : {0.02, 0.05, m.switch_time(), 0.2, 0.5}) {
      for (double x : {0.01, 0.3, 0.5, 0.93}) {
        for (double y : {0.02, 0.5, 0.77}) {
          const ValueGrad a = m.kernel_images(t, x, y), b = m.kernel_eigen(t, x, y);
          CHECK(std::abs(a.value - b.value) <= 1e-12);
          CHECK(std::abs(a.grad - b.grad) <= 1e-10);
        }
        const ValueGrad sa = m.survival_images(t, x), sb = m.survival_eigen(t, x);
        CHECK(std::abs(sa.value - sb.value) <= 1e-13);
        CHECK(std::abs(sa.grad - sb.grad) <= 1e-11);
      }
    }
  }

  TEST_CASE("Chapman-Kolmogorov with 64-node Gauss-Legendre") {
    const IntervalDomain m = scenario();
    const GaussRule r = gauss_legendre(64, 0.0, 1.0);
    for (auto [s, t] : {std::pair{0.05, 0.1}, {0.2, 0.3}, {0.1, 1.0}}) {
      for (auto [x, y] : {std::pair{0.3, 0.6}, {0.1, 0.9}, {0.5, 0.5}}) {
        double q = 0.0;
        for (std::size_t i = 0; i < r.nodes.size(); ++i)
          q += r.weights[i] * m.killed_kernel(s, x, r.nodes[i]) * m.killed_kernel(t, r.nodes[i], y);
        CHECK(std::abs(q - m.killed_kernel(s + t, x, y)) <= 1e-8);
      }
    }
  }

  TEST_CASE("alpha limits and decay") {
    const IntervalDomain m = scenario();
    for (double v : {0.01, 0.5, 0.99}) CHECK(m.alpha(1e-8, v) > 1.0 - 1e-3);
    const HalfLineDomain hl(BoundaryWeight(0.7));
    CHECK(hl.alpha(1.0, 1.0) == doctest::Approx(std::erf(1.0 / std::sqrt(2.0))).epsilon(1e-14));
    CHECK(hl.alpha(1.0, 1.0) == doctest::Approx(0.682689).epsilon(1e-6));
    const IntervalDomain flat(0, 1, BoundaryWeight(0.3), BoundaryWeight(0.3));
    const double ratio = flat.alpha(2.5, 0.5) / flat.alpha(2.0, 0.5);
    CHECK(std::abs(ratio - std::exp(-std::numbers::pi * std::numbers::pi * 0.5 / 2.0)) <= 1e-4);
    // Strictly decreasing in s.
    double prev = 1.0;
    for (double s = 0.01; s < 3.0; s *= 1.3) {
      const double a = m.alpha(s, 0.4);
      CHECK(a < prev);
      prev = a;
    }
    CHECK_THROWS_AS(m.alpha(0.0, 0.5), std::domain_error);
    CHECK_THROWS_AS(m.alpha(-1.0, 0.5), std::domain_error);
  }

  TEST_CASE("alpha matches the h-transform integral by quadrature") {
    const IntervalDomain m = scenario();
    const GaussRule r = gauss_legendre(96, 0.0, 1.0);
    for (double s : {0.05, 0.3, 1.0}) {
      for (double v : {0.2, 0.5, 0.8}) {
        double q = 0.0;
        for (std::size_t i = 0; i < r.nodes.size(); ++i)
          q += r.weights[i] * m.killed_kernel(s, v, r.nodes[i]) * m.beta(r.nodes[i]);
        CHECK(m.alpha(s, v) == doctest::Approx(q / m.beta(v)).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("grad log alpha") {
    const HalfLineDomain hl(BoundaryWeight(0.7));
    const double expected = 2.0 / std::sqrt(2.0 * std::numbers::pi) * std::exp(-0.5) / std::erf(1.0 / std::sqrt(2.0));
    CHECK(hl.grad_log_alpha(1.0, 1.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(expected == doctest::Approx(0.708875).epsilon(1e-6));
    const double h = 1e-5;
    const double fd = (std::log(hl.alpha(1.0, 1.0 + h)) - std::log(hl.alpha(1.0, 1.0 - h))) / (2 * h);
    CHECK(std::abs(hl.grad_log_alpha(1.0, 1.0) - fd) <= 1e-6);
    CHECK(hl.grad_log_alpha(1.0, 1e-4) * 1e-4 == doctest::Approx(1.0).epsilon(1e-3));

    const IntervalDomain sym(0, 1, BoundaryWeight(0.6), BoundaryWeight(0.6));
    for (double s : {0.01, 0.3, 2.0}) CHECK(std::abs(sym.grad_log_alpha(s, 0.5)) <= 1e-12);

    const IntervalDomain m = scenario();
    for (double s : {0.001, 0.05, 0.5, 5.0, 40.0}) {
      for (double v : {1e-6, 0.01, 0.4, 0.999999}) {
        const double g = m.grad_log_alpha(s, v);
        CHECK(std::isfinite(g));
      }
    }
    CHECK_THROWS_AS(m.grad_log_alpha(0.0, 0.5), std::domain_error);
  }

  TEST_CASE("harmonic measure") {
    const IntervalDomain m = scenario();
    auto mu = m.harmonic_measure(0.5);
    CHECK(mu[0].mass == doctest::Approx(0.5));
    CHECK(mu[1].mass == doctest::Approx(0.5));
    mu = m.harmonic_measure(0.25);
    CHECK(mu[0].point == 0.0);
    CHECK(mu[0].mass == doctest::Approx(0.75));
    CHECK(mu[1].mass == doctest::Approx(0.25));
    const auto h = HalfLineDomain(BoundaryWeight(0.7)).harmonic_measure(3.0);
    REQUIRE(h.size() == 1);
    CHECK(h[0].mass == 1.0);
    CHECK_THROWS_AS(m.harmonic_measure(1.0), std::domain_error);
  }

  TEST_CASE("principal eigenvalue") {
    CHECK(scenario().principal_eigenvalue() == doctest::Approx(std::numbers::pi * std::numbers::pi / 2.0));
    CHECK(HalfLineDomain(BoundaryWeight(0.5)).principal_eigenvalue() == 0.0);
  }

  TEST_CASE("domain JSON parsing and field paths") {
    using nlohmann::json;
    const auto m = domain_from_json(json{{"kind", "interval"}, {"a", 0.0}, {"b", 2.0}, {"rho", {{"a", 0.1}, {"b", 0.9}}}});
    CHECK(m->kind() == "interval");
    CHECK(m->upper() == 2.0);
    CHECK(domain_from_json(m->to_json())->to_json() == m->to_json());
    try {
      domain_from_json(json{{"kind", "interval"}, {"rho", {{"a", 0.1}}}});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "/domain/rho/b");
    }
    try {
      domain_from_json(json{{"kind", "disk"}, {"rho", json::object()}});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "/domain/kind");
    }
    CHECK_THROWS_AS(domain_from_json(json{{"kind", "halfline"}, {"rho", {{"0", 1.5}}}}), ConfigError);
    const BoundaryFunction f = boundary_function_from_json(*m, json{{"a", 1.0}, {"b", 2.0}});
    CHECK(f.values == std::vector<double>{1.0, 2.0});
    try {
      boundary_function_from_json(*m, json{{"a", 1.0}});
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field() == "/phi/b");
    }
  }
}
