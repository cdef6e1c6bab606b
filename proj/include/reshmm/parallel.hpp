#pragma once

#include <functional>

namespace reshmm {

// Worker count from RESHMM_WORKERS, defaulting to the hardware concurrency.
int worker_count();

// Run fn(i) for i in [0, n). Work is sharded across workers; callers write
// results into per-index slots so reductions stay deterministic.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace reshmm
