#pragma once

#include "cakes/dataset.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace cakes {

/// n points with i.i.d. uniform coordinates in [0,1]^d. Point i is drawn from
/// a substream keyed on (seed, i), so a longer run with the same seed extends
/// a shorter one.
Dataset gen_uniform_hypercube(std::size_t n, std::size_t d, std::uint64_t seed,
                              std::string name = "uniform");

/// n points on a random d_int-dimensional affine patch embedded in d
/// dimensions: orthonormal basis from the seed, uniform coefficients in
/// [0,1]^d_int, plus isotropic Gaussian noise. Same substream property as the
/// hypercube generator.
Dataset gen_manifold(std::size_t n, std::size_t d, std::size_t d_int, std::uint64_t seed,
                     std::string name = "manifold", double noise_sigma = 0.001);

/// n random sequences of the given length over the alphabet.
Dataset gen_sequences(std::size_t n, std::size_t length, std::string_view alphabet,
                      std::uint64_t seed, std::string name = "sequences");

} // namespace cakes
