#include <arm_neon.h>

#include "kernels_impl.hpp"

namespace tops::kernels::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  double s = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
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
    for (std::size_t i = 0; i < cols; ++i) axpy(w[r] * xr[i], xr + i, gram + i * cols + i, cols - i);
  }
}

void weighted_colsum(const double* x, std::size_t rows, std::size_t cols, const double* w,
                     double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy(w[r], x + r * cols, out, cols);
}

}  // namespace

const KernelTable kNeon{Isa::neon, dot, axpy, gemv, weighted_gram, weighted_colsum};

}  // namespace tops::kernels::detail
