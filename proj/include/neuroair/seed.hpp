#pragma once

#include <cstdint>
#include <string_view>

namespace neuroair {

/// SplitMix64 finalizer; used to fan one global seed out to stages and jobs.
std::uint64_t splitmix64(std::uint64_t x);

/// seed' = splitmix64(seed ^ fnv1a(tag)). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Worker count: NEUROAIR_THREADS if set (>= 1), else hardware concurrency.
unsigned worker_count();

}  // namespace neuroair
