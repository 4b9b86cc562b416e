#pragma once

namespace epifed {

/// Keeps large training buffers in the heap instead of returning them to the
/// OS after every step (glibc only; a no-op elsewhere).
void tune_allocator();

}  // namespace epifed
