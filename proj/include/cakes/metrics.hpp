#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cakes {

/// Storage kind of a point: fixed-dimension float vector or byte sequence.
enum class PointKind : std::uint8_t { vector, sequence };

/// Non-owning view of a single point. Exactly one of `vec`/`seq` is active,
/// according to `kind`.
struct PointRef {
    std::span<const float> vec{};
    std::string_view seq{};
    PointKind kind = PointKind::vector;

    static PointRef of_vector(std::span<const float> v) { return {v, {}, PointKind::vector}; }
    static PointRef of_sequence(std::string_view s) { return {{}, s, PointKind::sequence}; }
};

double euclidean(std::span<const float> a, std::span<const float> b);
double cosine(std::span<const float> a, std::span<const float> b);
std::uint64_t hamming(std::string_view a, std::string_view b);
std::uint64_t levenshtein(std::string_view a, std::string_view b);
double dtw(std::span<const float> a, std::span<const float> b);
double dtw(std::span<const std::complex<double>> a, std::span<const std::complex<double>> b);

/// A named distance function together with the properties search relies on:
/// symmetric, non-negative, finite, and zero on identical points. When
/// `is_metric()` the triangle inequality is guaranteed and every search
/// algorithm is exact. All functions are pure and stateless; evaluating from
/// any number of threads at once is safe.
class Metric {
  public:
    enum class Kind : std::uint8_t { euclidean, cosine, hamming, levenshtein, dtw };

    /// Looks up a function by its wire name ("euclidean", "cosine", "hamming",
    /// "levenshtein", "dtw"). Throws std::invalid_argument for unknown names.
    static Metric by_name(std::string_view name);
    static const std::vector<std::string>& names();

    double operator()(const PointRef& a, const PointRef& b) const;

    Kind kind() const { return kind_; }
    const char* name() const;
    /// Whether the triangle inequality is guaranteed. DTW is flagged as a
    /// metric; the triangle property test for it is advisory.
    bool is_metric() const;
    /// Point kind this function operates on.
    PointKind point_kind() const;

  private:
    explicit Metric(Kind k) : kind_(k) {}
    Kind kind_;
};

} // namespace cakes
