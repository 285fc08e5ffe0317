#pragma once

#include <cstddef>
#include <functional>

namespace pulse {

// Worker count: the explicit request when > 0, else PULSE_SEQ_THREADS, else
// hardware concurrency; always capped by PULSE_SEQ_THREADS when it is set.
std::size_t resolve_threads(std::size_t requested);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is handled
// exactly once; callers write results into index-addressed slots so the
// output does not depend on scheduling. Exceptions are rethrown on the caller.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace pulse
