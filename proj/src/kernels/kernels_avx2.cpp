#include <immintrin.h>

#include "kernels_impl.hpp"

namespace tops::kernels::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* x, std::size_t rows, std::size_t cols, const double* beta, double bias,
          double* out) {
  for (std::size_t r = 0; r < rows; ++r) out[r] = dot(x + r * cols, beta, cols) + bias;
}

void weighted_gram(const double* x, std::size_t rows, std::size_t cols, const double* w,
                   double* gram) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    for (std::size_t i = 0; i < cols; ++i) {
      const double a = w[r] * xr[i];
      axpy(a, xr + i, gram + i * cols + i, cols - i);
    }
  }
}

void weighted_colsum(const double* x, std::size_t rows, std::size_t cols, const double* w,
                     double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy(w[r], x + r * cols, out, cols);
}

}  // namespace

const KernelTable kAvx2{Isa::avx2, dot, axpy, gemv, weighted_gram, weighted_colsum};

}  // namespace tops::kernels::detail
