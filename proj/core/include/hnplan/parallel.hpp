#pragma once

#include <cstddef>
#include <functional>

namespace hnplan {

// Worker cap: HNP_THREADS if set, otherwise hardware concurrency.
std::size_t worker_count();

// Deterministic element-indexed map. fn(i) must touch only state owned by
// index i; the result is bitwise identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace hnplan
