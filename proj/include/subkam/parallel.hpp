#pragma once

#include <cstddef>
#include <functional>

namespace subkam {

/// Worker count: SUBKAM_THREADS if set and positive, otherwise the hardware
/// concurrency (at least 1).
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Indices are split into contiguous chunks,
/// one per worker; body must only write state owned by index i, so results
/// do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Chunked variant: body(begin, end) is called once per contiguous block.
void parallel_for_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace subkam
