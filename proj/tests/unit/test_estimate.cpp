#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "kvchaos/estimate.hpp"
#include "kvchaos/parallel.hpp"

using namespace kvchaos;

TEST_SUITE("estimate") {
  TEST_CASE("mean and standard error") {
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    const MCEstimate e = estimate(x);
    CHECK(e.mean == 2.5);
    CHECK(e.std_error == doctest::Approx(std::sqrt((1.25 * 4.0 / 3.0) / 4.0)));
    CHECK(e.n_samples == 4);
    CHECK_THROWS_AS(estimate(std::vector<double>{1.0}), std::invalid_argument);
  }

  TEST_CASE("KS test accepts normal samples and rejects shifted ones") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    std::vector<double> good(20000), bad(20000);
    for (auto& x : good) x = n(rng);
    for (auto& x : bad) x = n(rng) + 0.1;
    CHECK(ks_test_standard_normal(good).p_value > 0.01);
    CHECK(ks_test_standard_normal(bad).p_value < 1e-6);
  }

  TEST_CASE("KS statistic of a degenerate sample") {
    // Every sample at 0: the empirical CDF jumps from 0 to 1 where Phi = 1/2.
    const std::vector<double> x(5000, 0.0);
    const GoodnessOfFit g = ks_test_standard_normal(x);
    CHECK(g.statistic == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g.p_value < 1e-10);
  }

  TEST_CASE("correlation") {
    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10}, c{5, 4, 3, 2, 1};
    CHECK(sample_correlation(a, b) == doctest::Approx(1.0));
    CHECK(sample_correlation(a, c) == doctest::Approx(-1.0));
  }

  TEST_CASE("parallel_map is independent of the worker count") {
    auto f = [](std::size_t i) { return std::sin(static_cast<double>(i)) * 1e-3 + static_cast<double>(i); };
    const auto a = parallel_map<double>(1000, 1, f);
    const auto b = parallel_map<double>(1000, 4, f);
    CHECK(a == b);
    CHECK_THROWS_AS(parallel_map<int>(100, 3, [](std::size_t i) -> int {
                      if (i == 57) throw std::runtime_error("boom");
                      return 0;
                    }),
                    std::runtime_error);
  }
}
