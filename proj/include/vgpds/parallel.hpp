#pragma once

#include <cstddef>
#include <functional>

namespace vgpds {

// Number of worker threads, capped by the VGPDS_THREADS environment variable.
std::size_t thread_count();

// Runs body(i) for i in [0, count). Work items must write disjoint outputs;
// callers reduce per-item results in index order so results do not depend on
// the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)> &body);

}  // namespace vgpds
