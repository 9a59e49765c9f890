#pragma once

#include "tops/kernels.hpp"

namespace tops::kernels::detail {

extern const KernelTable kScalar;
#if defined(TOPS_HAVE_AVX2)
extern const KernelTable kAvx2;
#endif
#if defined(TOPS_HAVE_NEON)
extern const KernelTable kNeon;
#endif

}  // namespace tops::kernels::detail
