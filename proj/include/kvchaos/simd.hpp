#pragma once
// Dense inner-loop kernels used by the operator assembly: scalar reference
// implementations plus AVX2/FMA variants selected once at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace kvchaos::simd {

/// Table of kernel entry points for one instruction set.
struct KernelTable {
  std::string_view name;
  double (*dot)(const double* x, const double* y, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out[j] = w[j] / (t - x[j]); returns the sum of out.
  double (*cauchy_terms)(double t, const double* x, const double* w, double* out, std::size_t n);
  void (*scale)(double a, double* y, std::size_t n);
};

const KernelTable& scalar_kernels();

/// Null when the binary was built without AVX2 support.
const KernelTable* avx2_kernels();

/// Kernels selected for this process. AVX2 is used when the CPU reports
/// AVX2+FMA, unless KVCHAOS_SIMD=scalar is set in the environment.
const KernelTable& active_kernels();

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active_kernels().dot(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active_kernels().axpy(a, x.data(), y.data(), x.size());
}

/// Lagrange basis values l_j(t) of the barycentric interpolant on `nodes`.
/// `t` must not coincide with a node.
inline void barycentric_basis(double t, std::span<const double> nodes,
                              std::span<const double> bary_weights, std::span<double> out) {
  const auto& k = active_kernels();
  const double denom = k.cauchy_terms(t, nodes.data(), bary_weights.data(), out.data(), nodes.size());
  k.scale(1.0 / denom, out.data(), out.size());
}

}  // namespace kvchaos::simd
