#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

// Data-parallel inner loops shared by the base learners and path-weight
// fitting. Every kernel has a scalar reference implementation; SIMD variants
// (AVX2+FMA on x86-64, NEON on aarch64) are selected once at runtime. The
// environment variable TOPS_SIMD=scalar|avx2|neon forces a choice.
//
// Matrices are dense row-major with `cols` doubles per row. Gram matrices are
// `cols x cols` row-major; kernels only write the upper triangle (j >= i).

namespace tops::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// y[0..n) += alpha * x[0..n)
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out[r] = x_r . beta + bias
  void (*gemv)(const double* x, std::size_t rows, std::size_t cols, const double* beta, double bias,
               double* out);
  /// gram += sum_r w[r] x_r x_r^T   (upper triangle)
  void (*weighted_gram)(const double* x, std::size_t rows, std::size_t cols, const double* w,
                        double* gram);
  /// out += sum_r w[r] x_r
  void (*weighted_colsum)(const double* x, std::size_t rows, std::size_t cols, const double* w,
                          double* out);
};

const KernelTable& scalar_table();
/// nullptr when the variant is not compiled in or the CPU lacks it.
const KernelTable* table_for(Isa isa);
const KernelTable& active();
std::string_view name(Isa isa);

/// Copy the upper triangle into the lower one.
void symmetrize(std::span<double> gram, std::size_t cols);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

}  // namespace tops::kernels
