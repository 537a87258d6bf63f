#include "cakes/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace cakes {

namespace {

using Clock = std::chrono::steady_clock;

double us_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

void validate_k(std::size_t k, std::size_t n) {
    if (k == 0 || k > n) {
        throw std::invalid_argument("k must be in [1, cardinality]; got " + std::to_string(k) +
                                    " with cardinality " + std::to_string(n));
    }
}

void sort_by_distance(std::vector<std::pair<std::uint64_t, double>>& neighbors) {
    std::sort(neighbors.begin(), neighbors.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second < b.second;
        return a.first < b.first;
    });
}

} // namespace

KnnAlgo algo_by_name(std::string_view name) {
    if (name == "repeated-rnn") return KnnAlgo::repeated_rnn;
    if (name == "breadth-sieve") return KnnAlgo::breadth_first_sieve;
    if (name == "depth-sieve") return KnnAlgo::depth_first_sieve;
    if (name == "linear") return KnnAlgo::linear;
    throw std::invalid_argument("unknown k-NN algorithm: " + std::string(name));
}

const char* algo_name(KnnAlgo a) {
    switch (a) {
    case KnnAlgo::repeated_rnn: return "repeated-rnn";
    case KnnAlgo::breadth_first_sieve: return "breadth-sieve";
    case KnnAlgo::depth_first_sieve: return "depth-sieve";
    case KnnAlgo::linear: return "linear";
    }
    return "?";
}

const std::vector<KnnAlgo>& cakes_algos() {
    static const std::vector<KnnAlgo> algos = {KnnAlgo::repeated_rnn,
                                               KnnAlgo::breadth_first_sieve,
                                               KnnAlgo::depth_first_sieve};
    return algos;
}

void Hits::push(std::uint64_t index, double distance) {
    const std::pair<double, std::uint64_t> entry{distance, index};
    if (heap_.size() < capacity_) {
        heap_.push_back(entry);
        std::push_heap(heap_.begin(), heap_.end());
    } else if (entry < heap_.front()) {
        std::pop_heap(heap_.begin(), heap_.end());
        heap_.back() = entry;
        std::push_heap(heap_.begin(), heap_.end());
    }
}

std::vector<std::pair<std::uint64_t, double>> Hits::sorted() const {
    std::vector<std::pair<double, std::uint64_t>> copy = heap_;
    std::sort(copy.begin(), copy.end());
    std::vector<std::pair<std::uint64_t, double>> out;
    out.reserve(copy.size());
    for (const auto& [dist, idx] : copy) out.emplace_back(idx, dist);
    return out;
}

bool search_both_children(double d_far, double d_near, double pole_distance, double rho) {
    return (d_far + d_near) * (d_far - d_near) <= 2.0 * pole_distance * rho;
}

double radial_growth_factor(std::size_t k, std::uint64_t found, double mu) {
    if (found == 0) return 2.0;
    const double f =
        std::min(2.0, std::pow(static_cast<double>(k) / static_cast<double>(found), mu));
    // The factor must strictly grow the radius; fall back to doubling if it
    // degenerates numerically.
    return f > 1.0 ? f : 2.0;
}

double quickselect_tau(std::span<TauEntry> entries, std::uint64_t k) {
    std::uint64_t total = 0;
    for (const TauEntry& e : entries) total += e.multiplicity;
    if (k == 0 || total < k) {
        throw std::invalid_argument("quickselect_tau: multiplicities sum below k");
    }
    std::size_t lo = 0;
    std::size_t hi = entries.size();
    std::uint64_t need = k;
    while (hi - lo > 1) {
        const double a = entries[lo].value;
        const double b = entries[lo + (hi - lo) / 2].value;
        const double c = entries[hi - 1].value;
        const double pivot = std::max(std::min(a, b), std::min(std::max(a, b), c));
        // three-way partition of [lo, hi) around the pivot value
        std::size_t lt = lo;
        std::size_t i = lo;
        std::size_t gt = hi;
        std::uint64_t w_less = 0;
        std::uint64_t w_eq = 0;
        while (i < gt) {
            if (entries[i].value < pivot) {
                w_less += entries[i].multiplicity;
                std::swap(entries[lt++], entries[i++]);
            } else if (entries[i].value > pivot) {
                std::swap(entries[i], entries[--gt]);
            } else {
                w_eq += entries[i].multiplicity;
                ++i;
            }
        }
        if (need <= w_less) {
            hi = lt;
        } else if (need <= w_less + w_eq) {
            return pivot;
        } else {
            need -= w_less + w_eq;
            lo = gt;
        }
    }
    return entries[lo].value;
}

Searcher::Searcher(const Tree& tree, SearchOptions options)
    : tree_(&tree), data_(&tree.data()), metric_(tree.metric()), options_(options),
      prune_children_(options.pole_pruning && tree.strategy() == Strategy::unbalanced) {}

double Searcher::eval(const PointRef& a, const PointRef& b, SearchReport& stats) const {
    ++stats.distance_count;
    return metric_(a, b);
}

std::vector<RnnCandidate> Searcher::rnn_tree_search(const PointRef& q, double rho,
                                                    SearchReport& stats) const {
    if (rho < 0) throw std::invalid_argument("search radius must be non-negative");
    const auto& clusters = tree_->clusters();
    std::vector<RnnCandidate> out;

    struct Item {
        std::size_t ci;
        double delta;
    };
    std::vector<Item> stack;
    ++stats.clusters_visited;
    stack.push_back({0, eval(q, tree_->point_of_original(clusters[0].center), stats)});

    while (!stack.empty()) {
        const Item item = stack.back();
        stack.pop_back();
        const Cluster& c = clusters[item.ci];
        const DeltaTriple t = make_deltas(item.delta, c.radius);
        if (t.delta_minus > rho) continue;
        if (t.delta_plus <= rho) {
            out.push_back({item.ci, item.delta, true});
            continue;
        }
        if (c.is_leaf()) {
            out.push_back({item.ci, item.delta, false});
            continue;
        }

        const Cluster& left = clusters[c.left];
        const Cluster& right = clusters[c.right];
        ++stats.clusters_visited;
        const double dl = eval(q, tree_->point_of_original(left.center), stats);
        ++stats.clusters_visited;
        const double dr = eval(q, tree_->point_of_original(right.center), stats);
        bool keep_left = make_deltas(dl, left.radius).delta_minus <= rho;
        bool keep_right = make_deltas(dr, right.radius).delta_minus <= rho;
        if (keep_left && keep_right && prune_children_) {
            // Both children overlap the query ball; the pole geometry can
            // still prove that one of them holds no point of it.
            const double d_ql = eval(q, tree_->point_of_original(c.arg_radial), stats);
            const double d_qr = eval(q, tree_->point_of_original(c.arg_right), stats);
            if (!search_both_children(std::max(d_ql, d_qr), std::min(d_ql, d_qr),
                                      c.pole_distance, rho)) {
                if (d_ql <= d_qr) {
                    keep_right = false;
                } else {
                    keep_left = false;
                }
            }
        }
        if (keep_right) stack.push_back({static_cast<std::size_t>(c.right), dr});
        if (keep_left) stack.push_back({static_cast<std::size_t>(c.left), dl});
    }
    return out;
}

std::vector<std::pair<std::uint64_t, double>> Searcher::rnn_leaf_search(
    std::span<const RnnCandidate> candidates, const PointRef& q, double rho,
    SearchReport& stats) const {
    std::vector<std::pair<std::uint64_t, double>> hits;
    for (const RnnCandidate& cand : candidates) {
        const Cluster& c = tree_->clusters()[cand.cluster];
        for (std::uint64_t pos = c.offset; pos < c.offset + c.cardinality; ++pos) {
            const std::uint64_t orig = tree_->original_at(pos);
            // Points of fully covered clusters are all hits; their distances
            // are evaluated only to report them.
            const double d = orig == c.center ? cand.delta : eval(q, tree_->point_at(pos), stats);
            if (cand.contained || d <= rho) hits.emplace_back(orig, d);
        }
    }
    return hits;
}

SearchReport Searcher::rho_nn(const PointRef& q, double rho) const {
    const auto t0 = Clock::now();
    SearchReport report;
    const std::vector<RnnCandidate> candidates = rnn_tree_search(q, rho, report);
    report.neighbors = rnn_leaf_search(candidates, q, rho, report);
    sort_by_distance(report.neighbors);
    report.elapsed_us = us_since(t0);
    return report;
}

SearchReport Searcher::knn(const PointRef& q, std::size_t k, KnnAlgo algo) const {
    switch (algo) {
    case KnnAlgo::repeated_rnn: return knn_repeated_rnn(q, k);
    case KnnAlgo::breadth_first_sieve: return knn_breadth_first_sieve(q, k);
    case KnnAlgo::depth_first_sieve: return knn_depth_first_sieve(q, k);
    case KnnAlgo::linear: return linear_knn(*data_, metric_, q, k);
    }
    throw std::logic_error("unreachable");
}

SearchReport Searcher::knn_repeated_rnn(const PointRef& q, std::size_t k) const {
    const auto t0 = Clock::now();
    const std::size_t n = tree_->cardinality();
    validate_k(k, n);
    SearchReport report;
    const auto& clusters = tree_->clusters();
    const Cluster& root = clusters.front();

    if (root.radius == 0.0) {
        // Degenerate tree: a single leaf whose members all sit at the same
        // distance from any query. Return the k smallest original indices.
        ++report.clusters_visited;
        const double delta = eval(q, tree_->point_of_original(root.center), report);
        std::vector<std::uint64_t> originals(n);
        for (std::uint64_t pos = 0; pos < n; ++pos) originals[pos] = tree_->original_at(pos);
        std::nth_element(originals.begin(), originals.begin() + (k - 1), originals.end());
        originals.resize(k);
        std::sort(originals.begin(), originals.end());
        for (const std::uint64_t orig : originals) report.neighbors.emplace_back(orig, delta);
        report.elapsed_us = us_since(t0);
        return report;
    }

    std::vector<std::pair<std::uint64_t, double>> hits;
    double radius = root.radius / static_cast<double>(n);
    while (true) {
        const std::vector<RnnCandidate> candidates = rnn_tree_search(q, radius, report);
        if (candidates.empty()) {
            radius *= 2.0;
            continue;
        }
        std::uint64_t found = 0;
        for (const RnnCandidate& cand : candidates) found += clusters[cand.cluster].cardinality;
        if (found < static_cast<std::uint64_t>(k)) {
            double inv_sum = 0.0;
            for (const RnnCandidate& cand : candidates) {
                const double lfd = clusters[cand.cluster].lfd;
                inv_sum += lfd > 0 ? 1.0 / lfd : std::numeric_limits<double>::infinity();
            }
            const double mu = inv_sum / static_cast<double>(candidates.size());
            radius *= radial_growth_factor(k, found, mu);
            continue;
        }
        hits = rnn_leaf_search(candidates, q, radius, report);
        if (hits.size() >= k) break;
        // The overlapping clusters held at least k points, but fewer than k
        // of them were inside the ball itself. Keep growing.
        radius *= 2.0;
    }

    std::nth_element(hits.begin(), hits.begin() + (k - 1), hits.end(),
                     [](const auto& a, const auto& b) {
                         if (a.second != b.second) return a.second < b.second;
                         return a.first < b.first;
                     });
    hits.resize(k);
    sort_by_distance(hits);
    report.neighbors = std::move(hits);
    report.elapsed_us = us_since(t0);
    return report;
}

namespace {

/// A candidate of the breadth-first sieve: either a resolved point or a
/// cluster standing for all of its points. A cluster contributes the pair of
/// threshold entries (delta, 1) for its center and (delta_plus, |C|-1) for
/// the rest.
struct SieveUnit {
    bool is_point = false;
    std::uint64_t id = 0; // point: original index; cluster: cluster index
    double delta = 0;
    double d_minus = 0;
    double d_plus = 0;
    std::uint64_t mult = 0;
};

} // namespace

SearchReport Searcher::knn_breadth_first_sieve(const PointRef& q, std::size_t k) const {
    const auto t0 = Clock::now();
    validate_k(k, tree_->cardinality());
    SearchReport report;
    const auto& clusters = tree_->clusters();

    auto push_cluster = [&](std::size_t ci, std::vector<SieveUnit>& out) {
        const Cluster& c = clusters[ci];
        ++report.clusters_visited;
        const double delta = eval(q, tree_->point_of_original(c.center), report);
        const DeltaTriple t = make_deltas(delta, c.radius);
        out.push_back({false, ci, delta, t.delta_minus, t.delta_plus, c.cardinality});
    };

    std::vector<SieveUnit> units;
    push_cluster(0, units);
    std::vector<TauEntry> taus;
    while (true) {
        std::uint64_t total = 0;
        bool any_cluster = false;
        for (const SieveUnit& u : units) {
            total += u.mult;
            any_cluster |= !u.is_point;
        }
        if (total == static_cast<std::uint64_t>(k) || !any_cluster) break;

        taus.clear();
        for (const SieveUnit& u : units) {
            taus.push_back({u.delta, 1});
            if (!u.is_point && u.mult > 1) taus.push_back({u.d_plus, u.mult - 1});
        }
        const double tau = quickselect_tau(taus, k);

        std::vector<SieveUnit> next;
        for (const SieveUnit& u : units) {
            if (u.d_minus > tau) continue; // cannot hold one of the k nearest
            if (u.is_point) {
                next.push_back(u);
                continue;
            }
            const Cluster& c = clusters[u.id];
            if (c.is_leaf()) {
                for (std::uint64_t pos = c.offset; pos < c.offset + c.cardinality; ++pos) {
                    const std::uint64_t orig = tree_->original_at(pos);
                    const double d =
                        orig == c.center ? u.delta : eval(q, tree_->point_at(pos), report);
                    next.push_back({true, orig, d, d, d, 1});
                }
            } else {
                push_cluster(static_cast<std::size_t>(c.left), next);
                push_cluster(static_cast<std::size_t>(c.right), next);
            }
        }
        units = std::move(next);
    }

    // Resolve surviving clusters into points with true distances and order
    // the k results.
    std::vector<std::pair<double, std::uint64_t>> points;
    for (const SieveUnit& u : units) {
        if (u.is_point) {
            points.emplace_back(u.delta, u.id);
            continue;
        }
        const Cluster& c = clusters[u.id];
        for (std::uint64_t pos = c.offset; pos < c.offset + c.cardinality; ++pos) {
            const std::uint64_t orig = tree_->original_at(pos);
            const double d = orig == c.center ? u.delta : eval(q, tree_->point_at(pos), report);
            points.emplace_back(d, orig);
        }
    }
    const std::size_t kk = std::min(k, points.size());
    std::nth_element(points.begin(), points.begin() + (kk - 1), points.end());
    points.resize(kk);
    std::sort(points.begin(), points.end());
    report.neighbors.reserve(kk);
    for (const auto& [dist, orig] : points) report.neighbors.emplace_back(orig, dist);
    report.elapsed_us = us_since(t0);
    return report;
}

SearchReport Searcher::knn_depth_first_sieve(const PointRef& q, std::size_t k) const {
    const auto t0 = Clock::now();
    validate_k(k, tree_->cardinality());
    SearchReport report;
    const auto& clusters = tree_->clusters();

    struct QEntry {
        double d_minus;
        std::uint64_t offset; // deterministic tie-break
        std::size_t ci;
        double delta;
    };
    auto cmp = [](const QEntry& a, const QEntry& b) {
        if (a.d_minus != b.d_minus) return a.d_minus > b.d_minus;
        return a.offset > b.offset;
    };
    std::priority_queue<QEntry, std::vector<QEntry>, decltype(cmp)> queue(cmp);

    auto push = [&](std::size_t ci) {
        const Cluster& c = clusters[ci];
        ++report.clusters_visited;
        const double delta = eval(q, tree_->point_of_original(c.center), report);
        queue.push({make_deltas(delta, c.radius).delta_minus, c.offset, ci, delta});
    };
    push(0);

    Hits hits(k);
    while (!queue.empty()) {
        // Stop once the k-th best hit is provably closer than anything left.
        if (hits.full() && hits.top_distance() < queue.top().d_minus) break;
        while (!clusters[queue.top().ci].is_leaf()) {
            const QEntry top = queue.top();
            queue.pop();
            push(static_cast<std::size_t>(clusters[top.ci].left));
            push(static_cast<std::size_t>(clusters[top.ci].right));
        }
        const QEntry leaf = queue.top();
        queue.pop();
        const Cluster& c = clusters[leaf.ci];
        for (std::uint64_t pos = c.offset; pos < c.offset + c.cardinality; ++pos) {
            const std::uint64_t orig = tree_->original_at(pos);
            const double d = orig == c.center ? leaf.delta : eval(q, tree_->point_at(pos), report);
            hits.push(orig, d);
        }
    }
    report.neighbors = hits.sorted();
    report.elapsed_us = us_since(t0);
    return report;
}

SearchReport linear_knn(const Dataset& d, const Metric& f, const PointRef& q, std::size_t k) {
    const auto t0 = Clock::now();
    validate_k(k, d.cardinality());
    SearchReport report;
    Hits hits(k);
    for (std::size_t pos = 0; pos < d.cardinality(); ++pos) {
        ++report.distance_count;
        hits.push(d.original_index(pos), f(q, d.point(pos)));
    }
    report.neighbors = hits.sorted();
    report.elapsed_us = us_since(t0);
    return report;
}

SearchReport linear_rnn(const Dataset& d, const Metric& f, const PointRef& q, double rho) {
    if (rho < 0) throw std::invalid_argument("search radius must be non-negative");
    const auto t0 = Clock::now();
    SearchReport report;
    for (std::size_t pos = 0; pos < d.cardinality(); ++pos) {
        ++report.distance_count;
        const double dist = f(q, d.point(pos));
        if (dist <= rho) report.neighbors.emplace_back(d.original_index(pos), dist);
    }
    sort_by_distance(report.neighbors);
    report.elapsed_us = us_since(t0);
    return report;
}

std::vector<SearchReport> knn_batch(const Searcher& s, const Dataset& queries, std::size_t k,
                                    KnnAlgo algo, int workers) {
    std::vector<SearchReport> out(queries.cardinality());
    const auto n = static_cast<std::int64_t>(queries.cardinality());
    if (workers > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (std::int64_t i = 0; i < n; ++i) out[i] = s.knn(queries.point(i), k, algo);
    } else {
        for (std::int64_t i = 0; i < n; ++i) out[i] = s.knn(queries.point(i), k, algo);
    }
    return out;
}

std::vector<SearchReport> rnn_batch(const Searcher& s, const Dataset& queries,
                                    std::span<const double> rhos, int workers) {
    if (rhos.size() != 1 && rhos.size() != queries.cardinality()) {
        throw std::invalid_argument("rnn_batch: need one radius or one per query");
    }
    auto rho_of = [&](std::int64_t i) { return rhos.size() == 1 ? rhos[0] : rhos[i]; };
    std::vector<SearchReport> out(queries.cardinality());
    const auto n = static_cast<std::int64_t>(queries.cardinality());
    if (workers > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (std::int64_t i = 0; i < n; ++i) out[i] = s.rho_nn(queries.point(i), rho_of(i));
    } else {
        for (std::int64_t i = 0; i < n; ++i) out[i] = s.rho_nn(queries.point(i), rho_of(i));
    }
    return out;
}

std::vector<SearchReport> linear_knn_batch(const Dataset& d, const Metric& f,
                                           const Dataset& queries, std::size_t k, int workers) {
    std::vector<SearchReport> out(queries.cardinality());
    const auto n = static_cast<std::int64_t>(queries.cardinality());
    if (workers > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (std::int64_t i = 0; i < n; ++i) out[i] = linear_knn(d, f, queries.point(i), k);
    } else {
        for (std::int64_t i = 0; i < n; ++i) out[i] = linear_knn(d, f, queries.point(i), k);
    }
    return out;
}

} // namespace cakes
