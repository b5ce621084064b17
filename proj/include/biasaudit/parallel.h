#ifndef BIASAUDIT_PARALLEL_H_
#define BIASAUDIT_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace biasaudit {

// Worker count for a run: `requested` if positive, otherwise the hardware
// concurrency; always capped by BIASAUDIT_THREADS when that is set.
int resolve_workers(int requested = 0);

// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
// visited exactly once; callers write results to slot i and reduce serially.
// After all threads join, the exception from the lowest failing index (if
// any) is rethrown, so the reported failure does not depend on scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace biasaudit

#endif  // BIASAUDIT_PARALLEL_H_
