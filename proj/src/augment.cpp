#include "cakes/augment.hpp"

#include "cakes/metrics.hpp"
#include "cakes/random.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace cakes {

namespace {

/// Uniform draw from the epsilon-ball: normalized Gaussian direction scaled
/// by epsilon * u^(1/d).
void ball_offset(std::mt19937_64& rng, double epsilon, std::vector<double>& out) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    double norm2 = 0.0;
    for (double& v : out) {
        v = gauss(rng);
        norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = 1.0 - unit(rng); // (0, 1]
    const double scale = epsilon * std::pow(u, 1.0 / static_cast<double>(out.size())) / norm;
    for (double& v : out) v *= scale;
}

} // namespace

Dataset augment(const Dataset& d, const AugmentSpec& spec) {
    if (d.kind() != PointKind::vector) {
        throw std::invalid_argument("augment: sequence datasets are not supported");
    }
    if (spec.multiplier == 0) throw std::invalid_argument("augment: multiplier must be >= 1");
    if (spec.multiplier > 1 && spec.epsilon <= 0) {
        throw std::invalid_argument("augment: epsilon must be positive");
    }
    const std::size_t n = d.cardinality();
    const std::size_t dim = d.dimensionality();
    const std::span<const float> src = d.vector_data();

    std::vector<float> values(spec.multiplier * n * dim);
    std::memcpy(values.data(), src.data(), src.size() * sizeof(float));

    const auto synth_count = static_cast<std::int64_t>((spec.multiplier - 1) * n);
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < synth_count; ++j) {
        const std::size_t source = static_cast<std::size_t>(j) % n;
        std::mt19937_64 rng(derive_seed(spec.seed, static_cast<std::uint64_t>(j)));
        std::vector<double> offset(dim);
        const float* from = src.data() + source * dim;
        float* to = values.data() + (n + static_cast<std::size_t>(j)) * dim;
        ball_offset(rng, spec.epsilon, offset);
        while (true) {
            for (std::size_t c = 0; c < dim; ++c) {
                to[c] = static_cast<float>(static_cast<double>(from[c]) + offset[c]);
            }
            if (euclidean({from, dim}, {to, dim}) <= spec.epsilon) break;
            // Storage rounding pushed the realized distance past epsilon;
            // shrink the offset until it fits.
            for (double& v : offset) v *= 0.5;
        }
    }
    return Dataset::from_vectors(d.name() + "-x" + std::to_string(spec.multiplier),
                                 std::move(values), dim);
}

} // namespace cakes
