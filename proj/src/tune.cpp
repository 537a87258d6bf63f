#include "cakes/tune.hpp"

#include <algorithm>
#include <chrono>

namespace cakes {

TuningResult auto_tune(const Searcher& s, std::size_t k, std::uint32_t depth) {
    const Tree& tree = s.tree();
    const std::uint32_t target = std::min(depth, tree.max_depth());

    TuningResult result;
    result.k_used = std::min(k, tree.cardinality());
    for (const Cluster& c : tree.clusters()) {
        if (c.depth == target) result.panel.push_back(c.center);
    }

    using Clock = std::chrono::steady_clock;
    double best = 0;
    bool first = true;
    for (const KnnAlgo algo : cakes_algos()) {
        for (const std::uint64_t center : result.panel) {
            s.knn(tree.point_of_original(center), result.k_used, algo); // warmup
        }
        const auto t0 = Clock::now();
        for (const std::uint64_t center : result.panel) {
            s.knn(tree.point_of_original(center), result.k_used, algo);
        }
        const double elapsed = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
        result.times_us.emplace_back(algo, elapsed);
        if (first || elapsed < best) {
            best = elapsed;
            result.chosen = algo;
            first = false;
        }
    }
    return result;
}

} // namespace cakes
