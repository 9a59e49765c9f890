#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"

namespace tops::kernels {
namespace {

bool cpu_has(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(TOPS_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(TOPS_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& select() {
  if (const char* forced = std::getenv("TOPS_SIMD")) {
    const std::string f = forced;
    if (f == "scalar") return scalar_table();
    if (f == "avx2" && table_for(Isa::avx2)) return *table_for(Isa::avx2);
    if (f == "neon" && table_for(Isa::neon)) return *table_for(Isa::neon);
  }
  if (const KernelTable* t = table_for(Isa::avx2)) return *t;
  if (const KernelTable* t = table_for(Isa::neon)) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& scalar_table() { return detail::kScalar; }

const KernelTable* table_for(Isa isa) {
  if (!cpu_has(isa)) return nullptr;
  switch (isa) {
    case Isa::scalar: return &detail::kScalar;
#if defined(TOPS_HAVE_AVX2)
    case Isa::avx2: return &detail::kAvx2;
#endif
#if defined(TOPS_HAVE_NEON)
    case Isa::neon: return &detail::kNeon;
#endif
    default: return nullptr;
  }
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

std::string_view name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

void symmetrize(std::span<double> gram, std::size_t cols) {
  for (std::size_t i = 0; i < cols; ++i)
    for (std::size_t j = i + 1; j < cols; ++j) gram[j * cols + i] = gram[i * cols + j];
}

}  // namespace tops::kernels
