#pragma once

#include <cstddef>
#include <functional>

namespace ldspin {

// Deterministic parallel map: fn(i) may only write to state owned by index i.
// Callers reduce in index order afterwards, so results never depend on the
// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// 0 restores the hardware default.
void set_thread_count(int n);
int thread_count();

}  // namespace ldspin
