#pragma once

#include <cstddef>
#include <functional>

namespace tabgns {

/// Process-wide cap on worker threads for batched kernels. 1 disables
/// threading entirely. Values are clamped to [1, hardware_concurrency].
/// Every kernel partitions work by output row, so results are bit-identical
/// at any thread count; the cap only affects wall time.
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Reads the cap from the given environment variable ("TABGNS_THREADS" for
/// the CLI). Returns true when the variable was set; a value of 0 or 1
/// selects the single-threaded determinism path.
bool configure_threads_from_env(const char* var);

/// Runs fn(begin, end) over a partition of [0, n). Serial when the cap is 1
/// or the range is small.
void parallel_rows(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace tabgns
