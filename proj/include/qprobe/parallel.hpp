#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace qprobe {

// Runs f(i) for i in [0, n) on up to `jobs` threads. Each index runs exactly once;
// the first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f);

// Independent stream seed for item `index` of a run with master seed `master` (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace qprobe
