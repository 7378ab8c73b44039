#pragma once

#include <cstddef>
#include <functional>

namespace tcnn {

/// Runs fn(chunk_index, begin, end) over [0, total) split into `chunks`
/// contiguous ranges. The partition depends only on `total` and `chunks`,
/// never on the worker count, so per-chunk results combine into the same
/// totals no matter how many threads ran.
void parallel_chunks(std::size_t total, std::size_t chunks, unsigned jobs,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

unsigned default_jobs();

}  // namespace tcnn
