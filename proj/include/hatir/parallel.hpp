#pragma once

#include <functional>

namespace hatir {

// Process-wide worker count for per-frame loops. Results never depend on it:
// each index writes only its own slot.
void set_thread_count(int threads);
int thread_count() noexcept;

// Runs fn(0) .. fn(n-1); the first exception thrown by any index is
// rethrown on the calling thread after all workers finish.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace hatir
