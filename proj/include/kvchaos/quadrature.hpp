#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kvchaos {

/// Gauss-Legendre rule with ascending nodes.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [lo, hi].
GaussRule gauss_legendre(std::size_t n, double lo = -1.0, double hi = 1.0);

/// Barycentric weights for interpolation through Gauss-Legendre nodes
/// (up to a common factor, which cancels).
std::vector<double> gauss_barycentric_weights(const GaussRule& reference_rule);

/// Evaluate the polynomial interpolant of `values` at `t`.
double barycentric_interpolate(double t, std::span<const double> nodes,
                               std::span<const double> bary_weights, std::span<const double> values);

/// Centered Gaussian density with variance `var`.
double gaussian_density(double z, double var);

/// Standard normal mass of [z_lo, z_hi], evaluated without cancellation in the tails.
double normal_mass(double z_lo, double z_hi);

}  // namespace kvchaos
