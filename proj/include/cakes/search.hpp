#pragma once

#include "cakes/tree.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace cakes {

/// Query-to-cluster distance bounds: delta is the distance from the query to
/// the cluster center, delta_plus/delta_minus bound the distance from the
/// query to the farthest and closest member the cluster could hold.
struct DeltaTriple {
    double delta = 0;
    double delta_plus = 0;
    double delta_minus = 0;
};

inline DeltaTriple make_deltas(double center_distance, double radius) {
    return {center_distance, center_distance + radius,
            center_distance > radius ? center_distance - radius : 0.0};
}

/// Search results plus per-query instrumentation. Neighbors are
/// (original index, distance), sorted by distance then index.
struct SearchReport {
    std::vector<std::pair<std::uint64_t, double>> neighbors;
    std::uint64_t distance_count = 0;
    std::uint64_t clusters_visited = 0;
    double elapsed_us = 0.0;
};

enum class KnnAlgo : std::uint8_t { repeated_rnn, breadth_first_sieve, depth_first_sieve, linear };

KnnAlgo algo_by_name(std::string_view name);
const char* algo_name(KnnAlgo a);
const std::vector<KnnAlgo>& cakes_algos(); // the three tree-based algorithms

/// Bounded max-priority collection of (index, distance) pairs with capacity
/// k; keeps the k lexicographically smallest (distance, index) pairs and
/// evicts the largest in O(log k).
class Hits {
  public:
    explicit Hits(std::size_t capacity) : capacity_(capacity) {}

    void push(std::uint64_t index, double distance);
    bool full() const { return heap_.size() >= capacity_; }
    std::size_t size() const { return heap_.size(); }
    /// Largest kept distance; only meaningful when non-empty.
    double top_distance() const { return heap_.front().first; }
    /// Ascending by (distance, index).
    std::vector<std::pair<std::uint64_t, double>> sorted() const;

  private:
    std::vector<std::pair<double, std::uint64_t>> heap_;
    std::size_t capacity_;
};

struct SearchOptions {
    /// Apply the child-pruning inequality during rho-NN descent. Disabled
    /// internally for balanced trees, whose split violates the nearest-pole
    /// assignment the inequality relies on.
    bool pole_pruning = true;
};

/// A cluster surviving rho-NN tree-search: `contained` when the whole cluster
/// lies inside the query ball, straddling otherwise. `delta` is the already
/// evaluated query-to-center distance.
struct RnnCandidate {
    std::size_t cluster = 0;
    double delta = 0;
    bool contained = false;
};

/// True when the query ball can reach both children: with d_near <= d_far the
/// pole distances from the query, prune to the near child unless
/// (d_far + d_near)(d_far - d_near) <= 2 * pole_distance * rho.
bool search_both_children(double d_far, double d_near, double pole_distance, double rho);

/// Radius growth factor for Repeated rho-NN once clusters are found but hold
/// fewer than k points: min(2, (k/found)^mu), mu the mean inverse LFD.
double radial_growth_factor(std::size_t k, std::uint64_t found, double mu);

struct TauEntry {
    double value = 0;
    std::uint64_t multiplicity = 0;
};

/// The smallest value whose cumulative multiplicity (over entries with value
/// <= it) reaches k. Reorders entries in place around pivots. Throws
/// std::invalid_argument when the multiplicities sum to less than k.
double quickselect_tau(std::span<TauEntry> entries, std::uint64_t k);

/// Read-only search view over a built tree; one instance can serve any
/// number of concurrent queries, each with private instrumentation.
class Searcher {
  public:
    explicit Searcher(const Tree& tree, SearchOptions options = {});

    /// All points within distance rho of the query; exact under metrics.
    SearchReport rho_nn(const PointRef& q, double rho) const;

    SearchReport knn(const PointRef& q, std::size_t k, KnnAlgo algo) const;
    SearchReport knn_repeated_rnn(const PointRef& q, std::size_t k) const;
    SearchReport knn_breadth_first_sieve(const PointRef& q, std::size_t k) const;
    SearchReport knn_depth_first_sieve(const PointRef& q, std::size_t k) const;

    /// Clusters overlapping the query ball; fully covered clusters are
    /// returned whole without descending.
    std::vector<RnnCandidate> rnn_tree_search(const PointRef& q, double rho,
                                              SearchReport& stats) const;
    /// Points of the candidates within rho, with true distances.
    std::vector<std::pair<std::uint64_t, double>> rnn_leaf_search(
        std::span<const RnnCandidate> candidates, const PointRef& q, double rho,
        SearchReport& stats) const;

    const Tree& tree() const { return *tree_; }

  private:
    double eval(const PointRef& a, const PointRef& b, SearchReport& stats) const;

    const Tree* tree_;
    const Dataset* data_;
    Metric metric_;
    SearchOptions options_;
    bool prune_children_;
};

/// Exhaustive scans; distance_count equals the cardinality. These serve as
/// the ground-truth oracle for every tree-based algorithm.
SearchReport linear_knn(const Dataset& d, const Metric& f, const PointRef& q, std::size_t k);
SearchReport linear_rnn(const Dataset& d, const Metric& f, const PointRef& q, double rho);

/// Batch drivers: queries fan out across OpenMP workers when workers > 1;
/// workers == 1 runs the serial reference path. Reports keep query order.
std::vector<SearchReport> knn_batch(const Searcher& s, const Dataset& queries, std::size_t k,
                                    KnnAlgo algo, int workers = 1);
std::vector<SearchReport> rnn_batch(const Searcher& s, const Dataset& queries,
                                    std::span<const double> rhos, int workers = 1);
std::vector<SearchReport> linear_knn_batch(const Dataset& d, const Metric& f,
                                           const Dataset& queries, std::size_t k,
                                           int workers = 1);

} // namespace cakes
