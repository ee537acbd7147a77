#pragma once

#include <cstddef>
#include <span>

namespace kvchaos {

/// Monte Carlo mean with standard error = sample std / sqrt(n).
struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

/// Samples are reduced in index order. Requires at least two samples.
MCEstimate estimate(std::span<const double> samples);

/// Standard error of a difference of independent estimates.
double combined_stderr(const MCEstimate& a, const MCEstimate& b);

/// Kolmogorov-Smirnov test of samples against N(0,1).
struct GoodnessOfFit {
  double statistic = 0.0;
  double p_value = 0.0;
  std::size_t n = 0;
};
GoodnessOfFit ks_test_standard_normal(std::span<const double> samples);

/// Pearson correlation of the pairs (x_i, y_i).
double sample_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace kvchaos
