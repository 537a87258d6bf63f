#pragma once

#include "cakes/search.hpp"

#include <cstdint>
#include <vector>

namespace cakes {

/// Outcome of timing the three tree-based k-NN algorithms over a panel of
/// cluster centers; `chosen` minimizes the measured total time. Searching
/// with other k values afterwards is still permitted.
struct TuningResult {
    KnnAlgo chosen = KnnAlgo::depth_first_sieve;
    std::vector<std::pair<KnnAlgo, double>> times_us;
    std::vector<std::uint64_t> panel; // query original indices
    std::size_t k_used = 0;
};

/// Panel = centers of every cluster at depth min(depth, max tree depth).
/// Each algorithm gets one untimed warmup pass before the timed pass;
/// algorithms run sequentially to avoid cross-interference.
TuningResult auto_tune(const Searcher& s, std::size_t k, std::uint32_t depth = 10);

} // namespace cakes
