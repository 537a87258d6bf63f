#pragma once

#include "cakes/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cakes {

enum class FileFormat : std::uint8_t { raw_f32, csv, sequences };

FileFormat format_by_name(std::string_view name);
const char* format_name(FileFormat f);

/// An ordered collection of points plus the permutation mapping stored
/// position to original index. The permutation is the identity until a tree
/// reorders the points; externally visible neighbor indices are always
/// original indices. Immutable after load/permutation, so any number of
/// search workers may read it concurrently.
class Dataset {
  public:
    static Dataset from_vectors(std::string name, std::vector<float> values,
                                std::size_t dimensionality);
    static Dataset from_sequences(std::string name, const std::vector<std::string>& seqs);

    static Dataset load(const std::filesystem::path& path, FileFormat format);
    void save(const std::filesystem::path& path, FileFormat format) const;

    const std::string& name() const { return name_; }
    PointKind kind() const { return kind_; }
    std::size_t cardinality() const { return permutation_.size(); }
    /// Dimensionality of vector data; 0 ("variable") for sequence data.
    std::size_t dimensionality() const { return dimensionality_; }

    PointRef point(std::size_t position) const;
    std::uint64_t original_index(std::size_t position) const { return permutation_[position]; }
    std::size_t position_of_original(std::uint64_t original) const { return inverse_[original]; }
    bool is_permuted() const;
    const std::vector<std::uint64_t>& permutation() const { return permutation_; }

    /// Physically reorders storage so position i holds the point currently at
    /// position order[i] (equal to its original index while unpermuted). The
    /// permutation is composed, so original indices stay recoverable. Requires
    /// exclusive access. Throws std::invalid_argument if order is not a
    /// bijection on [0, cardinality).
    void apply_permutation(std::span<const std::uint64_t> order);

    /// n points drawn uniformly without replacement; reproducible per seed.
    /// The result is a standalone dataset with fresh original indices.
    Dataset subsample(std::size_t n, std::uint64_t seed) const;

    std::span<const float> vector_data() const { return values_; }
    const std::string& sequence_blob() const { return blob_; }

  private:
    Dataset() = default;

    std::string name_;
    PointKind kind_ = PointKind::vector;
    std::size_t dimensionality_ = 0;
    std::vector<float> values_;        // vector data, row-major
    std::string blob_;                 // sequence data, concatenated
    std::vector<std::uint64_t> seq_offsets_; // cardinality + 1 entries
    std::vector<std::uint64_t> permutation_; // position -> original index
    std::vector<std::uint64_t> inverse_;     // original index -> position
};

/// Per-query oracle neighbors, each list sorted non-decreasing by distance.
struct GroundTruth {
    std::vector<std::vector<std::pair<std::uint64_t, double>>> per_query;
    std::size_t k = 0;
    std::string distance;
};

/// One line per query: {"query": q, "neighbors": [[idx, dist], ...]}.
void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt);
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// Tie-forgiving recall: |returned ∩ truth| / k where any candidate at
/// distance <= the k-th truth distance counts as correct.
double recall(std::span<const std::pair<std::uint64_t, double>> result,
              std::span<const std::pair<std::uint64_t, double>> truth, std::size_t k);

} // namespace cakes
