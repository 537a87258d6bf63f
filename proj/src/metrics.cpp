#include "cakes/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cakes {

double euclidean(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("euclidean: dimension mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    }
    // Accumulate in double even though points are stored single precision, so
    // that comparisons made during pruning are consistent.
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        sum += d * d;
    }
    return std::sqrt(sum);
}

double cosine(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    // Zero vectors: 0 against another zero vector, 1 otherwise, so that
    // identity of indiscernibles holds at the origin.
    if (na == 0.0 || nb == 0.0) return (na == 0.0 && nb == 0.0) ? 0.0 : 1.0;
    // |cos| >= 1 pinned before dividing, so evaluate(x, x) is exactly 0.
    if (dot * dot >= na * nb) return dot >= 0 ? 0.0 : 2.0;
    const double d = 1.0 - dot / std::sqrt(na * nb);
    return std::clamp(d, 0.0, 2.0);
}

std::uint64_t hamming(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("hamming: length mismatch (" + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()) + ")");
    }
    std::uint64_t count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) count += a[i] != b[i];
    return count;
}

std::uint64_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    if (b.empty()) return a.size();
    // Two-row dynamic program; the row tracks distances against the shorter
    // sequence.
    std::vector<std::uint64_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::uint64_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::uint64_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            diag = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
        }
    }
    return row[b.size()];
}

namespace {

template <typename T, typename Step>
double dtw_impl(std::span<const T> a, std::span<const T> b, Step step) {
    if (a.empty() || b.empty()) throw std::invalid_argument("dtw: empty series");
    // cost(i,j) = step(a[i], b[j]) + min(cost(i-1,j), cost(i,j-1), cost(i-1,j-1)),
    // full band, kept as a single rolling row.
    std::vector<double> row(b.size());
    row[0] = step(a[0], b[0]);
    for (std::size_t j = 1; j < b.size(); ++j) row[j] = row[j - 1] + step(a[0], b[j]);
    for (std::size_t i = 1; i < a.size(); ++i) {
        double diag = row[0];
        row[0] += step(a[i], b[0]);
        for (std::size_t j = 1; j < b.size(); ++j) {
            const double best = std::min({row[j], row[j - 1], diag});
            diag = row[j];
            row[j] = step(a[i], b[j]) + best;
        }
    }
    return row[b.size() - 1];
}

} // namespace

double dtw(std::span<const float> a, std::span<const float> b) {
    return dtw_impl(a, b, [](float x, float y) {
        return std::abs(static_cast<double>(x) - static_cast<double>(y));
    });
}

double dtw(std::span<const std::complex<double>> a, std::span<const std::complex<double>> b) {
    return dtw_impl(a, b, [](const std::complex<double>& x, const std::complex<double>& y) {
        return std::abs(x - y);
    });
}

namespace {

std::span<const float> vec_of(const PointRef& p, const char* fn) {
    if (p.kind != PointKind::vector) {
        throw std::invalid_argument(std::string(fn) + ": expects vector points");
    }
    return p.vec;
}

std::string_view seq_of(const PointRef& p, const char* fn) {
    if (p.kind != PointKind::sequence) {
        throw std::invalid_argument(std::string(fn) + ": expects sequence points");
    }
    return p.seq;
}

} // namespace

Metric Metric::by_name(std::string_view name) {
    if (name == "euclidean") return Metric(Kind::euclidean);
    if (name == "cosine") return Metric(Kind::cosine);
    if (name == "hamming") return Metric(Kind::hamming);
    if (name == "levenshtein") return Metric(Kind::levenshtein);
    if (name == "dtw") return Metric(Kind::dtw);
    throw std::invalid_argument("unknown distance function: " + std::string(name));
}

const std::vector<std::string>& Metric::names() {
    static const std::vector<std::string> all = {"euclidean", "cosine", "hamming", "levenshtein",
                                                 "dtw"};
    return all;
}

double Metric::operator()(const PointRef& a, const PointRef& b) const {
    switch (kind_) {
    case Kind::euclidean:
        return euclidean(vec_of(a, "euclidean"), vec_of(b, "euclidean"));
    case Kind::cosine:
        return cosine(vec_of(a, "cosine"), vec_of(b, "cosine"));
    case Kind::hamming:
        return static_cast<double>(hamming(seq_of(a, "hamming"), seq_of(b, "hamming")));
    case Kind::levenshtein:
        return static_cast<double>(levenshtein(seq_of(a, "levenshtein"), seq_of(b, "levenshtein")));
    case Kind::dtw:
        return dtw(vec_of(a, "dtw"), vec_of(b, "dtw"));
    }
    throw std::logic_error("unreachable");
}

const char* Metric::name() const {
    switch (kind_) {
    case Kind::euclidean: return "euclidean";
    case Kind::cosine: return "cosine";
    case Kind::hamming: return "hamming";
    case Kind::levenshtein: return "levenshtein";
    case Kind::dtw: return "dtw";
    }
    return "?";
}

bool Metric::is_metric() const { return kind_ != Kind::cosine; }

PointKind Metric::point_kind() const {
    return (kind_ == Kind::hamming || kind_ == Kind::levenshtein) ? PointKind::sequence
                                                                  : PointKind::vector;
}

} // namespace cakes
