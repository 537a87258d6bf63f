#pragma once

#include "cakes/dataset.hpp"
#include "cakes/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace cakes {

enum class Strategy : std::uint8_t { unbalanced, balanced };

Strategy strategy_by_name(std::string_view name);
const char* strategy_name(Strategy s);

/// Stopping criteria for divisive partitioning. A cluster is split only while
/// it holds more than one point, its radius exceeds `min_radius` (so clusters
/// of duplicate points become leaves under the defaults), it has at least
/// `min_cardinality` points, and its depth is below `max_depth` when set.
struct PartitionCriteria {
    std::uint64_t min_cardinality = 1;
    double min_radius = 0.0;
    std::optional<std::uint32_t> max_depth{};
};

/// Node of the binary cluster tree. A cluster's points occupy the contiguous
/// range [offset, offset + cardinality) of the tree order; the left child
/// keeps its parent's offset and the right child starts after the left.
struct Cluster {
    std::uint64_t center = 0;     // original index of the center point
    double radius = 0.0;          // max distance from the center to any member
    std::uint64_t offset = 0;
    std::uint64_t cardinality = 0;
    double lfd = 0.0;             // log2 ratio of member counts at r and r/2
    std::uint32_t depth = 0;
    std::int64_t left = -1;       // indices into Tree::clusters(); -1 on leaves
    std::int64_t right = -1;
    std::uint64_t arg_radial = 0; // original index of the point realizing the radius (left pole)
    std::uint64_t arg_right = 0;  // original index of the right pole (internal clusters only)
    double pole_distance = 0.0;   // distance between the poles (internal clusters only)

    bool is_leaf() const { return left < 0; }
};

/// The built cluster tree. Immutable once built; concurrent readers are safe.
/// Clusters are stored in preorder, with the root at index 0.
class Tree {
  public:
    const Cluster& root() const { return clusters_.front(); }
    const std::vector<Cluster>& clusters() const { return clusters_; }
    const Dataset& data() const { return *data_; }
    const Metric& metric() const { return metric_; }
    Strategy strategy() const { return strategy_; }
    std::uint64_t seed() const { return seed_; }
    const PartitionCriteria& criteria() const { return criteria_; }
    bool permuted() const { return permuted_; }
    std::uint32_t max_depth() const { return max_depth_; }
    std::size_t cardinality() const { return data_->cardinality(); }

    /// Original index of the point at a tree position.
    std::uint64_t original_at(std::uint64_t tree_pos) const {
        return permuted_ ? data_->original_index(tree_pos) : order_[tree_pos];
    }
    PointRef point_at(std::uint64_t tree_pos) const {
        return permuted_ ? data_->point(tree_pos) : data_->point(order_[tree_pos]);
    }
    PointRef point_of_original(std::uint64_t original) const {
        return data_->point(data_->position_of_original(original));
    }

    /// Tree order while unpermuted, empty afterwards (the dataset's own
    /// permutation then carries it).
    const std::vector<std::uint64_t>& order() const { return order_; }

  private:
    friend Tree build(const Dataset&, const Metric&, const PartitionCriteria&, Strategy,
                      std::uint64_t);
    friend void depth_first_reorder(Tree&, Dataset&);
    friend Tree load_tree(const std::filesystem::path&, Dataset&);

    Tree(const Dataset& d, Metric m) : data_(&d), metric_(m) {}

    const Dataset* data_;
    Metric metric_;
    Strategy strategy_ = Strategy::unbalanced;
    std::uint64_t seed_ = 0;
    PartitionCriteria criteria_{};
    bool permuted_ = false;
    std::uint32_t max_depth_ = 0;
    std::vector<Cluster> clusters_;
    std::vector<std::uint64_t> order_;
};

/// Builds the cluster tree by divisive partitioning: the center of each
/// cluster is the geometric median of a seeded sample, the left pole is the
/// point realizing the radius, the right pole the point farthest from it, and
/// points go to the child of the nearer pole (ties left). The balanced
/// strategy instead ranks points by f(l,x) - f(r,x) and gives the left child
/// the first ceil(|C|/2). Deterministic for a fixed seed; sibling subtrees
/// are partitioned in parallel. The dataset must not be permuted yet.
Tree build(const Dataset& d, const Metric& f, const PartitionCriteria& criteria = {},
           Strategy strategy = Strategy::unbalanced, std::uint64_t seed = 0);

/// Original index of the member minimizing the summed distance to all given
/// members; ties broken by smallest original index. `members` are stored
/// positions.
std::uint64_t geometric_median(const Dataset& d, const Metric& f,
                               std::span<const std::uint64_t> members);

/// log2(cardinality / within_half_radius); 0 when the counts coincide.
double lfd_estimate(std::uint64_t cardinality, std::uint64_t within_half_radius);

/// Physically reorders the dataset so each cluster's points sit in
/// [offset, offset + cardinality); afterwards index storage is exactly the
/// n-entry permutation. Throws std::logic_error when reordering twice.
void depth_first_reorder(Tree& t, Dataset& d);

/// Leaf count and mean leaf radius.
std::pair<std::size_t, double> metric_entropy(const Tree& t);

/// Cardinality-weighted LFD percentiles per depth.
struct LfdDepthRow {
    std::uint32_t depth = 0;
    double min = 0, p5 = 0, p25 = 0, p50 = 0, p75 = 0, p95 = 0, max = 0;
    std::uint64_t points = 0;
};

std::vector<LfdDepthRow> lfd_report(const Tree& t);
std::vector<LfdDepthRow> lfd_report(std::span<const Cluster> clusters);

/// Serialized form: one JSON header line, the n-entry tree order as
/// little-endian u64, then preorder records of
/// (center u64, radius f64, offset u64, cardinality u64, lfd f64, leaf u8).
void save_tree(const Tree& t, const std::filesystem::path& path);

/// Raw contents of a tree file, before wiring to a dataset.
struct TreeFile {
    std::string distance;
    Strategy strategy = Strategy::unbalanced;
    std::uint64_t seed = 0;
    std::uint64_t cardinality = 0;
    std::uint64_t dimensionality = 0; // 0 for "variable"
    bool permuted = false;
    std::vector<std::uint64_t> order;
    std::vector<Cluster> clusters; // children and depths reconstructed
};

TreeFile read_tree_file(const std::filesystem::path& path);

/// Loads a tree and wires it to `d` (which must be freshly loaded, i.e. not
/// permuted). Pole fields are recomputed from the dataset. When the file was
/// saved from a permuted tree, `d` is permuted in place.
Tree load_tree(const std::filesystem::path& path, Dataset& d);

} // namespace cakes
