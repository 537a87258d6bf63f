#pragma once

#include "cakes/dataset.hpp"

#include <cstdint>

namespace cakes {

/// Parameters for synthetic augmentation: each original point contributes
/// multiplier - 1 extra points within epsilon of it, so the output holds
/// multiplier * cardinality points.
struct AugmentSpec {
    std::uint64_t multiplier = 1;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
};

/// Originals keep their indices; synthetic points are appended, the j-th
/// appended point deriving from source j mod cardinality. Offsets are drawn
/// uniformly from the epsilon-ball and kept within epsilon after rounding to
/// storage precision. Deterministic per seed; sources are augmented in
/// parallel from per-point substreams. Sequence datasets are rejected.
Dataset augment(const Dataset& d, const AugmentSpec& spec);

} // namespace cakes
