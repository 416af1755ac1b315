#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace heatdual {

/// Sets the worker count used by parallel_for. 0 selects hardware concurrency.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(i) for i in [0, n) over contiguous static chunks. Each index is
/// processed exactly once, so per-index results never depend on the worker
/// count. If bodies throw, the exception of the lowest failing chunk is
/// rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace heatdual
