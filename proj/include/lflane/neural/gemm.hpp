#pragma once

#include <cstddef>

// Small row-major kernels. Loop orders keep the innermost loop contiguous so
// the compiler vectorizes them; the dot product uses an explicit simd
// reduction (needs -fopenmp-simd to take effect, correct without it).

namespace lflane::nn::kernel {

// c[i, :] += a[i, k] * b[k, :] for a (m x k), b (k x n), c (m x n).
inline void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c[p, :] += a[i, p] * b[i, :] for a (m x k), b (m x n), c (k x n); i.e. c += a^T b.
inline void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// c[i, p] += dot(a[i, :], b[p, :]) for a (m x n), b (k x n), c (m x k); i.e. c += a b^T.
inline void gemm_nt_acc(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) c[i * k + p] += dot(a + i * n, b + p * n, n);
}

}  // namespace lflane::nn::kernel
