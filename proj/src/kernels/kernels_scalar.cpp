#include "kernels_impl.hpp"

namespace tops::kernels::detail {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
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
      double* gi = gram + i * cols;
      for (std::size_t j = i; j < cols; ++j) gi[j] += a * xr[j];
    }
  }
}

void weighted_colsum(const double* x, std::size_t rows, std::size_t cols, const double* w,
                     double* out) {
  for (std::size_t r = 0; r < rows; ++r) axpy(w[r], x + r * cols, out, cols);
}

}  // namespace

const KernelTable kScalar{Isa::scalar, dot, axpy, gemv, weighted_gram, weighted_colsum};

}  // namespace tops::kernels::detail
