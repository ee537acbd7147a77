#include "kvchaos/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "kvchaos/simd.hpp"

namespace kvchaos {

GaussRule gauss_legendre(std::size_t n, double lo, double hi) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: need at least one node");
  if (!(lo < hi)) throw std::invalid_argument("gauss_legendre: empty interval");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    // Newton on P_n from the Tricomi-style initial guess; converges quadratically.
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    if (n == 1) {
      x = 0.0;
      dp = 1.0;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // x is the i-th largest root.
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.nodes[i] = mid - half * x;
    rule.weights[n - 1 - i] = half * w;
    rule.weights[i] = half * w;
  }
  return rule;
}

std::vector<double> gauss_barycentric_weights(const GaussRule& reference_rule) {
  const std::size_t n = reference_rule.nodes.size();
  const double lo = reference_rule.nodes.front();
  const double hi = reference_rule.nodes.back();
  // Map back to [-1,1]; the half-width is recovered from the symmetric node pair.
  const double mid = 0.5 * (lo + hi);
  double half = 0.0;
  double wsum = 0.0;
  for (double w : reference_rule.weights) wsum += w;
  half = 0.5 * wsum;
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double xi = (reference_rule.nodes[j] - mid) / half;
    const double wj = reference_rule.weights[j] / half;
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    out[j] = sign * std::sqrt((1.0 - xi * xi) * wj);
  }
  return out;
}

double barycentric_interpolate(double t, std::span<const double> nodes,
                               std::span<const double> bary_weights, std::span<const double> values) {
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (t == nodes[j]) return values[j];
  }
  std::vector<double> terms(nodes.size());
  const auto& k = simd::active_kernels();
  const double denom = k.cauchy_terms(t, nodes.data(), bary_weights.data(), terms.data(), nodes.size());
  return k.dot(terms.data(), values.data(), nodes.size()) / denom;
}

double gaussian_density(double z, double var) {
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double normal_mass(double z_lo, double z_hi) {
  constexpr double r = std::numbers::sqrt2 / 2.0;
  if (z_lo >= 0.0) return 0.5 * (std::erfc(z_lo * r) - std::erfc(z_hi * r));
  if (z_hi <= 0.0) return 0.5 * (std::erfc(-z_hi * r) - std::erfc(-z_lo * r));
  return 1.0 - 0.5 * std::erfc(-z_lo * r) - 0.5 * std::erfc(z_hi * r);
}

}  // namespace kvchaos
