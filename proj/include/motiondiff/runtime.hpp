#pragma once

namespace motiondiff {

// Keeps freed tensor buffers in the heap instead of returning them to the
// OS after every op; training and sampling allocate the same sizes over and
// over. No-op outside glibc.
void tune_allocator();

}  // namespace motiondiff
