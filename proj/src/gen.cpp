#include "cakes/gen.hpp"

#include "cakes/random.hpp"

#include <cmath>
#include <stdexcept>

namespace cakes {

namespace {

constexpr std::uint64_t kBasisSalt = 0x6261736973ULL;
constexpr std::uint64_t kPointSalt = 0x706f696e74ULL;

std::mt19937_64 point_rng(std::uint64_t seed, std::uint64_t i) {
    return std::mt19937_64(derive_seed(seed, kPointSalt, i));
}

} // namespace

Dataset gen_uniform_hypercube(std::size_t n, std::size_t d, std::uint64_t seed,
                              std::string name) {
    if (n == 0 || d == 0) throw std::invalid_argument("gen: n and d must be positive");
    std::vector<float> values(n * d);
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
        std::mt19937_64 rng = point_rng(seed, static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t j = 0; j < d; ++j) {
            values[static_cast<std::size_t>(i) * d + j] = static_cast<float>(unit(rng));
        }
    }
    return Dataset::from_vectors(std::move(name), std::move(values), d);
}

Dataset gen_manifold(std::size_t n, std::size_t d, std::size_t d_int, std::uint64_t seed,
                     std::string name, double noise_sigma) {
    if (n == 0 || d == 0) throw std::invalid_argument("gen: n and d must be positive");
    if (d_int == 0 || d_int > d) {
        throw std::invalid_argument("gen: intrinsic dimension must be in [1, d]");
    }

    // Orthonormal basis of the patch: Gaussian columns, modified Gram-Schmidt.
    std::vector<std::vector<double>> basis(d_int, std::vector<double>(d));
    std::mt19937_64 basis_rng(derive_seed(seed, kBasisSalt));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t b = 0; b < d_int; ++b) {
        for (std::size_t j = 0; j < d; ++j) basis[b][j] = gauss(basis_rng);
        for (std::size_t prev = 0; prev < b; ++prev) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += basis[b][j] * basis[prev][j];
            for (std::size_t j = 0; j < d; ++j) basis[b][j] -= dot * basis[prev][j];
        }
        double norm2 = 0.0;
        for (const double v : basis[b]) norm2 += v * v;
        const double norm = std::sqrt(norm2);
        for (double& v : basis[b]) v /= norm;
    }

    std::vector<float> values(n * d);
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
        std::mt19937_64 rng = point_rng(seed, static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> noise(0.0, noise_sigma);
        std::vector<double> coeff(d_int);
        for (double& c : coeff) c = unit(rng);
        float* out = values.data() + static_cast<std::size_t>(i) * d;
        for (std::size_t j = 0; j < d; ++j) {
            double v = 0.0;
            for (std::size_t b = 0; b < d_int; ++b) v += coeff[b] * basis[b][j];
            if (noise_sigma > 0) v += noise(rng);
            out[j] = static_cast<float>(v);
        }
    }
    return Dataset::from_vectors(std::move(name), std::move(values), d);
}

Dataset gen_sequences(std::size_t n, std::size_t length, std::string_view alphabet,
                      std::uint64_t seed, std::string name) {
    if (n == 0 || length == 0 || alphabet.empty()) {
        throw std::invalid_argument("gen: n, length and alphabet must be non-empty");
    }
    std::vector<std::string> seqs(n);
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
        std::mt19937_64 rng = point_rng(seed, static_cast<std::uint64_t>(i));
        std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
        std::string& s = seqs[i];
        s.resize(length);
        for (std::size_t j = 0; j < length; ++j) s[j] = alphabet[pick(rng)];
    }
    return Dataset::from_sequences(std::move(name), seqs);
}

} // namespace cakes
