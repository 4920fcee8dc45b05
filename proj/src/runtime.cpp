#include "motiondiff/runtime.hpp"

// Any libc header defines __GLIBC__; the check below needs it.
#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace motiondiff {

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace motiondiff
