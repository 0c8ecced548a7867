#pragma once

#include <cstddef>
#include <functional>

namespace tomo {

/// Global worker cap. Defaults to TOMOKIT_THREADS when set, else the number
/// of hardware threads.
int worker_count();
void set_worker_count(int n);

/// Runs fn(i) for i in [0, n). Each index must write only to state owned by
/// that index; the result is then independent of the worker count.
void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& fn);

}  // namespace tomo
