#include "cakes/tree.hpp"

#include "cakes/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace cakes {

namespace {

constexpr std::uint64_t kExactMedianLimit = 100; // clusters this small use every point
constexpr std::uint64_t kParallelGrain = 4096;   // subtrees below this stay on one thread

std::uint64_t ceil_sqrt(std::uint64_t n) {
    auto s = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
    while (s * s < n) ++s;
    while (s > 1 && (s - 1) * (s - 1) >= n) --s;
    return s;
}

struct BuildNode {
    Cluster c;
    std::unique_ptr<BuildNode> left, right;
};

struct BuildContext {
    const Dataset& data;
    const Metric& metric;
    PartitionCriteria criteria;
    Strategy strategy;
    std::uint64_t seed;
    std::vector<std::uint64_t>* order; // original indices, refined in place
};

/// Per-thread scratch for partitioning. All of it is consumed before a node
/// recurses into its children, so reuse across the task tree is safe.
struct BuildScratch {
    std::vector<std::uint64_t> sample;
    std::vector<double> dist_c, dist_l, dist_r;
    std::vector<std::uint64_t> split, slots;
};

BuildScratch& build_scratch() {
    static thread_local BuildScratch s;
    return s;
}

void partition_node(const BuildContext& ctx, BuildNode& node) {
    Cluster& c = node.c;
    std::uint64_t* seg = ctx.order->data() + c.offset;
    const std::uint64_t card = c.cardinality;

    if (card == 1) {
        c.center = seg[0];
        c.arg_radial = seg[0];
        return;
    }
    BuildScratch& scratch = build_scratch();

    // Center: geometric median of a seeded sample; small clusters use all
    // points. While building, stored positions equal original indices.
    std::vector<std::uint64_t>& sample = scratch.sample;
    if (card <= kExactMedianLimit) {
        sample.assign(seg, seg + card);
    } else {
        std::mt19937_64 rng(derive_seed(ctx.seed, c.offset, card));
        sample.clear();
        for (const std::uint64_t slot : sample_distinct(rng, card, ceil_sqrt(card))) {
            sample.push_back(seg[slot]);
        }
    }
    c.center = geometric_median(ctx.data, ctx.metric, sample);

    // One scan from the center yields the radius, the left pole, and the LFD.
    const PointRef center_pt = ctx.data.point(c.center);
    std::vector<double>& dist_c = scratch.dist_c;
    dist_c.resize(card);
    double radius = 0.0;
    std::uint64_t arg_radial = c.center;
    for (std::uint64_t i = 0; i < card; ++i) {
        const double d =
            seg[i] == c.center ? 0.0 : ctx.metric(center_pt, ctx.data.point(seg[i]));
        dist_c[i] = d;
        if (d > radius || (d == radius && seg[i] < arg_radial)) {
            radius = d;
            arg_radial = seg[i];
        }
    }
    c.radius = radius;
    c.arg_radial = arg_radial;
    std::uint64_t within_half = 0;
    for (std::uint64_t i = 0; i < card; ++i) within_half += dist_c[i] <= radius / 2.0;
    c.lfd = lfd_estimate(card, within_half);

    const bool split = radius > ctx.criteria.min_radius &&
                       card >= ctx.criteria.min_cardinality &&
                       (!ctx.criteria.max_depth || c.depth < *ctx.criteria.max_depth);
    if (!split) return;

    // Poles: the left pole realizes the radius, the right pole is the point
    // farthest from it. radius > 0 guarantees both children are non-empty.
    const PointRef l_pt = ctx.data.point(c.arg_radial);
    std::vector<double>& dist_l = scratch.dist_l;
    dist_l.resize(card);
    double pole_distance = 0.0;
    std::uint64_t arg_right = c.arg_radial;
    for (std::uint64_t i = 0; i < card; ++i) {
        const double d =
            seg[i] == c.arg_radial ? 0.0 : ctx.metric(l_pt, ctx.data.point(seg[i]));
        dist_l[i] = d;
        if (d > pole_distance || (d == pole_distance && seg[i] < arg_right)) {
            pole_distance = d;
            arg_right = seg[i];
        }
    }
    c.arg_right = arg_right;
    c.pole_distance = pole_distance;

    const PointRef r_pt = ctx.data.point(c.arg_right);
    std::vector<double>& dist_r = scratch.dist_r;
    dist_r.resize(card);
    for (std::uint64_t i = 0; i < card; ++i) {
        dist_r[i] = seg[i] == c.arg_right ? 0.0 : ctx.metric(r_pt, ctx.data.point(seg[i]));
    }

    // Split the segment: left part from the front, right part from the back,
    // then restore the right part's stable order.
    std::vector<std::uint64_t>& split_buf = scratch.split;
    split_buf.resize(card);
    std::uint64_t li = 0;
    std::uint64_t ri = card;
    if (ctx.strategy == Strategy::unbalanced) {
        // points equidistant from the two poles go left
        for (std::uint64_t i = 0; i < card; ++i) {
            if (dist_l[i] <= dist_r[i]) {
                split_buf[li++] = seg[i];
            } else {
                split_buf[--ri] = seg[i];
            }
        }
    } else {
        std::vector<std::uint64_t>& slots = scratch.slots;
        slots.resize(card);
        std::iota(slots.begin(), slots.end(), 0);
        std::sort(slots.begin(), slots.end(), [&](std::uint64_t a, std::uint64_t b) {
            const double da = dist_l[a] - dist_r[a];
            const double db = dist_l[b] - dist_r[b];
            if (da != db) return da < db;
            return seg[a] < seg[b];
        });
        const std::uint64_t left_count = (card + 1) / 2;
        for (std::uint64_t i = 0; i < card; ++i) {
            if (i < left_count) {
                split_buf[li++] = seg[slots[i]];
            } else {
                split_buf[--ri] = seg[slots[i]];
            }
        }
    }
    std::reverse(split_buf.begin() + li, split_buf.end());
    std::copy(split_buf.begin(), split_buf.end(), seg);

    node.left = std::make_unique<BuildNode>();
    node.left->c.offset = c.offset;
    node.left->c.cardinality = li;
    node.left->c.depth = c.depth + 1;
    node.right = std::make_unique<BuildNode>();
    node.right->c.offset = c.offset + li;
    node.right->c.cardinality = card - li;
    node.right->c.depth = c.depth + 1;

    // Sibling subtrees touch disjoint segments of the order, so they can be
    // partitioned concurrently; the barrier closing build()'s parallel region
    // joins all spawned tasks before the tree is flattened.
    if (card >= kParallelGrain) {
        BuildNode* left = node.left.get();
#pragma omp task default(none) firstprivate(left) shared(ctx)
        partition_node(ctx, *left);
        partition_node(ctx, *node.right);
    } else {
        partition_node(ctx, *node.left);
        partition_node(ctx, *node.right);
    }
}

std::int64_t flatten(BuildNode& n, std::vector<Cluster>& out, std::uint32_t& max_depth) {
    const auto idx = static_cast<std::int64_t>(out.size());
    out.push_back(n.c);
    max_depth = std::max(max_depth, n.c.depth);
    if (n.left) {
        const std::int64_t li = flatten(*n.left, out, max_depth);
        const std::int64_t ri = flatten(*n.right, out, max_depth);
        out[idx].left = li;
        out[idx].right = ri;
    }
    return idx;
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in, const char* what) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::invalid_argument(std::string("truncated tree file at ") + what);
    return v;
}

double read_f64(std::istream& in, const char* what) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::invalid_argument(std::string("truncated tree file at ") + what);
    return v;
}

/// Rebuilds pole fields from the dataset; build computes them the same way.
void recompute_poles(std::vector<Cluster>& clusters, const Tree& t) {
    const Metric& metric = t.metric();
    const auto count = static_cast<std::int64_t>(clusters.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t ci = 0; ci < count; ++ci) {
        Cluster& c = clusters[ci];
        if (c.cardinality == 1) {
            c.arg_radial = c.center;
            continue;
        }
        const PointRef center_pt = t.point_of_original(c.center);
        double best = -1.0;
        std::uint64_t arg = 0;
        for (std::uint64_t pos = c.offset; pos < c.offset + c.cardinality; ++pos) {
            const std::uint64_t orig = t.original_at(pos);
            const double d = orig == c.center ? 0.0 : metric(center_pt, t.point_at(pos));
            if (d > best || (d == best && orig < arg)) {
                best = d;
                arg = orig;
            }
        }
        c.arg_radial = arg;
        if (c.is_leaf()) continue;
        const PointRef l_pt = t.point_of_original(c.arg_radial);
        double best_r = -1.0;
        std::uint64_t arg_r = 0;
        for (std::uint64_t pos = c.offset; pos < c.offset + c.cardinality; ++pos) {
            const std::uint64_t orig = t.original_at(pos);
            const double d = orig == c.arg_radial ? 0.0 : metric(l_pt, t.point_at(pos));
            if (d > best_r || (d == best_r && orig < arg_r)) {
                best_r = d;
                arg_r = orig;
            }
        }
        c.arg_right = arg_r;
        c.pole_distance = best_r;
    }
}

} // namespace

Strategy strategy_by_name(std::string_view name) {
    if (name == "unbalanced") return Strategy::unbalanced;
    if (name == "balanced") return Strategy::balanced;
    throw std::invalid_argument("unknown strategy: " + std::string(name));
}

const char* strategy_name(Strategy s) {
    return s == Strategy::unbalanced ? "unbalanced" : "balanced";
}

std::uint64_t geometric_median(const Dataset& d, const Metric& f,
                               std::span<const std::uint64_t> members) {
    if (members.empty()) throw std::invalid_argument("geometric_median: empty member set");
    if (members.size() == 1) return d.original_index(members[0]);
    // Canonicalize to ascending original index so the result does not depend
    // on the caller's ordering of the subset.
    std::vector<std::uint64_t> m(members.begin(), members.end());
    std::sort(m.begin(), m.end(),
              [&](std::uint64_t a, std::uint64_t b) { return d.original_index(a) < d.original_index(b); });
    std::vector<double> sums(m.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const PointRef pi = d.point(m[i]);
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            const double dist = f(pi, d.point(m[j]));
            sums[i] += dist;
            sums[j] += dist;
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < m.size(); ++i) {
        if (sums[i] < sums[best]) best = i;
    }
    return d.original_index(m[best]);
}

double lfd_estimate(std::uint64_t cardinality, std::uint64_t within_half_radius) {
    if (within_half_radius == 0) within_half_radius = 1; // the center always counts
    return std::log2(static_cast<double>(cardinality) / static_cast<double>(within_half_radius));
}

Tree build(const Dataset& d, const Metric& f, const PartitionCriteria& criteria,
           Strategy strategy, std::uint64_t seed) {
    if (d.cardinality() == 0) throw std::invalid_argument("build: empty dataset");
    if (d.is_permuted()) throw std::logic_error("build: dataset is already permuted");
    if (f.point_kind() != d.kind()) {
        throw std::invalid_argument(std::string(f.name()) +
                                    " does not apply to this dataset's point kind");
    }
    if (criteria.min_cardinality == 0) throw std::invalid_argument("min_cardinality must be >= 1");
    if (criteria.min_radius < 0) throw std::invalid_argument("min_radius must be non-negative");

    std::vector<std::uint64_t> order(d.cardinality());
    std::iota(order.begin(), order.end(), 0);
    BuildContext ctx{d, f, criteria, strategy, seed, &order};

    BuildNode root;
    root.c.offset = 0;
    root.c.cardinality = d.cardinality();
    root.c.depth = 0;
#pragma omp parallel default(none) shared(ctx, root)
#pragma omp single
    partition_node(ctx, root);

    Tree t(d, f);
    t.strategy_ = strategy;
    t.seed_ = seed;
    t.criteria_ = criteria;
    flatten(root, t.clusters_, t.max_depth_);
    t.order_ = std::move(order);
    return t;
}

void depth_first_reorder(Tree& t, Dataset& d) {
    if (&d != t.data_) throw std::invalid_argument("depth_first_reorder: wrong dataset");
    if (t.permuted_) throw std::logic_error("depth_first_reorder: tree is already reordered");
    d.apply_permutation(t.order_);
    t.order_.clear();
    t.order_.shrink_to_fit();
    t.permuted_ = true;
}

std::pair<std::size_t, double> metric_entropy(const Tree& t) {
    std::size_t leaves = 0;
    double radius_sum = 0.0;
    for (const Cluster& c : t.clusters()) {
        if (c.is_leaf()) {
            ++leaves;
            radius_sum += c.radius;
        }
    }
    return {leaves, radius_sum / static_cast<double>(leaves)};
}

std::vector<LfdDepthRow> lfd_report(const Tree& t) { return lfd_report(t.clusters()); }

std::vector<LfdDepthRow> lfd_report(std::span<const Cluster> clusters) {
    std::uint32_t max_depth = 0;
    for (const Cluster& c : clusters) max_depth = std::max(max_depth, c.depth);

    std::vector<std::vector<std::pair<double, std::uint64_t>>> by_depth(max_depth + 1);
    for (const Cluster& c : clusters) by_depth[c.depth].emplace_back(c.lfd, c.cardinality);

    std::vector<LfdDepthRow> rows;
    rows.reserve(by_depth.size());
    for (std::uint32_t depth = 0; depth <= max_depth; ++depth) {
        auto& entries = by_depth[depth];
        std::sort(entries.begin(), entries.end());
        std::uint64_t total = 0;
        for (const auto& [lfd, w] : entries) total += w;

        // Each cluster counts as many times as its cardinality: the p-th
        // percentile is the smallest LFD whose cumulative weight reaches
        // p% of the points at this depth.
        auto percentile = [&](double p) {
            const double target = p * static_cast<double>(total);
            std::uint64_t cum = 0;
            for (const auto& [lfd, w] : entries) {
                cum += w;
                if (static_cast<double>(cum) >= target) return lfd;
            }
            return entries.back().first;
        };

        LfdDepthRow row;
        row.depth = depth;
        row.min = entries.front().first;
        row.p5 = percentile(0.05);
        row.p25 = percentile(0.25);
        row.p50 = percentile(0.50);
        row.p75 = percentile(0.75);
        row.p95 = percentile(0.95);
        row.max = entries.back().first;
        row.points = total;
        rows.push_back(row);
    }
    return rows;
}

void save_tree(const Tree& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write tree file: " + path.string());

    nlohmann::json header;
    header["distance"] = t.metric().name();
    header["strategy"] = strategy_name(t.strategy());
    header["seed"] = t.seed();
    header["cardinality"] = t.cardinality();
    if (t.data().kind() == PointKind::vector) {
        header["dimensionality"] = t.data().dimensionality();
    } else {
        header["dimensionality"] = "variable";
    }
    header["permuted"] = t.permuted();
    out << header.dump() << '\n';

    const std::vector<std::uint64_t>& order =
        t.permuted() ? t.data().permutation() : t.order();
    out.write(reinterpret_cast<const char*>(order.data()),
              static_cast<std::streamsize>(order.size() * sizeof(std::uint64_t)));

    for (const Cluster& c : t.clusters()) {
        write_u64(out, c.center);
        write_f64(out, c.radius);
        write_u64(out, c.offset);
        write_u64(out, c.cardinality);
        write_f64(out, c.lfd);
        out.put(c.is_leaf() ? 1 : 0);
    }
}

TreeFile read_tree_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open tree file: " + path.string());

    std::string header_line;
    if (!std::getline(in, header_line)) throw std::invalid_argument("missing tree header");
    const nlohmann::json header = nlohmann::json::parse(header_line, nullptr, false);
    if (header.is_discarded()) throw std::invalid_argument("malformed tree header");

    TreeFile f;
    f.distance = header.at("distance").get<std::string>();
    f.strategy = strategy_by_name(header.at("strategy").get<std::string>());
    f.seed = header.at("seed").get<std::uint64_t>();
    f.cardinality = header.at("cardinality").get<std::uint64_t>();
    if (header.at("dimensionality").is_string()) {
        f.dimensionality = 0;
    } else {
        f.dimensionality = header.at("dimensionality").get<std::uint64_t>();
    }
    f.permuted = header.at("permuted").get<bool>();
    if (f.cardinality == 0) throw std::invalid_argument("tree header: zero cardinality");

    f.order.resize(f.cardinality);
    in.read(reinterpret_cast<char*>(f.order.data()),
            static_cast<std::streamsize>(f.order.size() * sizeof(std::uint64_t)));
    if (!in) throw std::invalid_argument("truncated tree order");

    std::vector<std::uint8_t> leaf_flags;
    while (true) {
        Cluster c;
        std::uint64_t center = 0;
        in.read(reinterpret_cast<char*>(&center), sizeof center);
        if (in.eof()) break;
        if (!in) throw std::invalid_argument("truncated cluster record");
        c.center = center;
        c.radius = read_f64(in, "radius");
        c.offset = read_u64(in, "offset");
        c.cardinality = read_u64(in, "cardinality");
        c.lfd = read_f64(in, "lfd");
        const int flag = in.get();
        if (flag == EOF) throw std::invalid_argument("truncated cluster record");
        leaf_flags.push_back(static_cast<std::uint8_t>(flag));
        f.clusters.push_back(c);
    }
    if (f.clusters.empty()) throw std::invalid_argument("tree file holds no clusters");

    // Preorder plus leaf flags pins down the whole shape.
    std::size_t cur = 0;
    std::function<std::int64_t(std::uint32_t)> link = [&](std::uint32_t depth) -> std::int64_t {
        if (cur >= f.clusters.size()) throw std::invalid_argument("cluster records end early");
        const auto idx = static_cast<std::int64_t>(cur++);
        f.clusters[idx].depth = depth;
        if (!leaf_flags[idx]) {
            f.clusters[idx].left = link(depth + 1);
            f.clusters[idx].right = link(depth + 1);
        }
        return idx;
    };
    link(0);
    if (cur != f.clusters.size()) throw std::invalid_argument("trailing cluster records");
    if (f.clusters[0].offset != 0 || f.clusters[0].cardinality != f.cardinality) {
        throw std::invalid_argument("tree root does not cover the dataset");
    }
    return f;
}

Tree load_tree(const std::filesystem::path& path, Dataset& d) {
    TreeFile f = read_tree_file(path);
    if (f.cardinality != d.cardinality()) {
        throw std::invalid_argument("tree cardinality does not match the dataset");
    }
    const Metric metric = Metric::by_name(f.distance);
    if (metric.point_kind() != d.kind()) {
        throw std::invalid_argument("tree distance does not match the dataset's point kind");
    }
    if (d.kind() == PointKind::vector && f.dimensionality != d.dimensionality()) {
        throw std::invalid_argument("tree dimensionality does not match the dataset");
    }
    if (d.is_permuted()) throw std::logic_error("load_tree: dataset is already permuted");

    Tree t(d, metric);
    t.strategy_ = f.strategy;
    t.seed_ = f.seed;
    t.clusters_ = std::move(f.clusters);
    for (const Cluster& c : t.clusters_) t.max_depth_ = std::max(t.max_depth_, c.depth);
    if (f.permuted) {
        d.apply_permutation(f.order);
        t.permuted_ = true;
    } else {
        t.order_ = std::move(f.order);
    }
    recompute_poles(t.clusters_, t);
    return t;
}

} // namespace cakes
