#include "cakes/dataset.hpp"

#include "cakes/random.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cakes {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'K', 'E', 'S', 'B', 'I', 'N'};

[[noreturn]] void input_error(const std::string& msg) { throw std::invalid_argument(msg); }

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) input_error("cannot open file: " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    return out;
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in, const std::string& what) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) input_error("truncated file while reading " + what);
    return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in = open_in(path, true);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    // A final newline produces one empty trailing element; drop it.
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    for (auto& l : lines) {
        if (!l.empty() && l.back() == '\r') l.pop_back();
    }
    return lines;
}

Dataset load_raw_f32(const std::filesystem::path& path) {
    std::ifstream in = open_in(path, true);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        input_error("malformed header: bad magic in " + path.string());
    }
    const std::uint64_t card = read_u64(in, "cardinality");
    const std::uint64_t dim = read_u64(in, "dimensionality");
    if (card == 0) input_error("zero cardinality in " + path.string());
    if (dim == 0) input_error("zero dimensionality in " + path.string());
    std::vector<float> values(card * dim);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!in) input_error("truncated payload in " + path.string());
    for (std::uint64_t i = 0; i < card; ++i) {
        for (std::uint64_t j = 0; j < dim; ++j) {
            if (!std::isfinite(values[i * dim + j])) {
                input_error("non-finite value in point " + std::to_string(i));
            }
        }
    }
    return Dataset::from_vectors(path.stem().string(), std::move(values), dim);
}

Dataset load_csv(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) input_error("zero cardinality in " + path.string());
    std::vector<float> values;
    std::size_t dim = 0;
    for (std::size_t row = 0; row < lines.size(); ++row) {
        const std::string& line = lines[row];
        std::size_t fields = 0;
        const char* p = line.c_str();
        while (true) {
            char* end = nullptr;
            const float v = std::strtof(p, &end);
            if (end == p) input_error("csv row " + std::to_string(row) + ": cannot parse field");
            if (!std::isfinite(v)) {
                input_error("non-finite value in csv row " + std::to_string(row));
            }
            values.push_back(v);
            ++fields;
            while (*end == ' ' || *end == '\t') ++end;
            if (*end == ',') {
                p = end + 1;
            } else if (*end == '\0') {
                break;
            } else {
                input_error("csv row " + std::to_string(row) + ": unexpected character");
            }
        }
        if (row == 0) {
            dim = fields;
        } else if (fields != dim) {
            input_error("csv row " + std::to_string(row) + ": expected " + std::to_string(dim) +
                        " fields, got " + std::to_string(fields));
        }
    }
    return Dataset::from_vectors(path.stem().string(), std::move(values), dim);
}

Dataset load_sequences(const std::filesystem::path& path) {
    const std::vector<std::string> lines = read_lines(path);
    bool fasta = false;
    for (const auto& l : lines) {
        if (l.empty()) continue;
        fasta = l[0] == '>';
        break;
    }
    std::vector<std::string> seqs;
    if (fasta) {
        std::string cur;
        bool open = false;
        for (const auto& l : lines) {
            if (!l.empty() && l[0] == '>') {
                if (open) seqs.push_back(std::move(cur));
                cur.clear();
                open = true;
            } else if (open) {
                cur += l;
            }
        }
        if (open) seqs.push_back(std::move(cur));
    } else {
        seqs = lines;
    }
    if (seqs.empty()) input_error("zero cardinality in " + path.string());
    return Dataset::from_sequences(path.stem().string(), seqs);
}

void append_float(std::string& out, float v) {
    char buf[32];
    // 9 significant digits round-trip any float32 exactly.
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    out += buf;
}

} // namespace

FileFormat format_by_name(std::string_view name) {
    if (name == "raw-f32") return FileFormat::raw_f32;
    if (name == "csv") return FileFormat::csv;
    if (name == "sequences") return FileFormat::sequences;
    throw std::invalid_argument("unknown file format: " + std::string(name));
}

const char* format_name(FileFormat f) {
    switch (f) {
    case FileFormat::raw_f32: return "raw-f32";
    case FileFormat::csv: return "csv";
    case FileFormat::sequences: return "sequences";
    }
    return "?";
}

Dataset Dataset::from_vectors(std::string name, std::vector<float> values,
                              std::size_t dimensionality) {
    if (dimensionality == 0) input_error("dataset dimensionality must be positive");
    if (values.empty() || values.size() % dimensionality != 0) {
        input_error("vector payload size is not a multiple of the dimensionality");
    }
    Dataset d;
    d.name_ = std::move(name);
    d.kind_ = PointKind::vector;
    d.dimensionality_ = dimensionality;
    d.values_ = std::move(values);
    const std::size_t n = d.values_.size() / dimensionality;
    d.permutation_.resize(n);
    std::iota(d.permutation_.begin(), d.permutation_.end(), 0);
    d.inverse_ = d.permutation_;
    return d;
}

Dataset Dataset::from_sequences(std::string name, const std::vector<std::string>& seqs) {
    if (seqs.empty()) input_error("zero cardinality");
    Dataset d;
    d.name_ = std::move(name);
    d.kind_ = PointKind::sequence;
    d.dimensionality_ = 0;
    d.seq_offsets_.reserve(seqs.size() + 1);
    d.seq_offsets_.push_back(0);
    for (const auto& s : seqs) {
        d.blob_ += s;
        d.seq_offsets_.push_back(d.blob_.size());
    }
    d.permutation_.resize(seqs.size());
    std::iota(d.permutation_.begin(), d.permutation_.end(), 0);
    d.inverse_ = d.permutation_;
    return d;
}

Dataset Dataset::load(const std::filesystem::path& path, FileFormat format) {
    switch (format) {
    case FileFormat::raw_f32: return load_raw_f32(path);
    case FileFormat::csv: return load_csv(path);
    case FileFormat::sequences: return load_sequences(path);
    }
    throw std::logic_error("unreachable");
}

void Dataset::save(const std::filesystem::path& path, FileFormat format) const {
    if ((format == FileFormat::sequences) != (kind_ == PointKind::sequence)) {
        input_error("format " + std::string(format_name(format)) +
                    " does not match the dataset's point kind");
    }
    switch (format) {
    case FileFormat::raw_f32: {
        std::ofstream out = open_out(path, true);
        out.write(kMagic, 8);
        write_u64(out, cardinality());
        write_u64(out, dimensionality_);
        out.write(reinterpret_cast<const char*>(values_.data()),
                  static_cast<std::streamsize>(values_.size() * sizeof(float)));
        break;
    }
    case FileFormat::csv: {
        std::ofstream out = open_out(path, false);
        std::string line;
        for (std::size_t i = 0; i < cardinality(); ++i) {
            line.clear();
            for (std::size_t j = 0; j < dimensionality_; ++j) {
                if (j) line += ',';
                append_float(line, values_[i * dimensionality_ + j]);
            }
            line += '\n';
            out << line;
        }
        break;
    }
    case FileFormat::sequences: {
        std::ofstream out = open_out(path, true);
        for (std::size_t i = 0; i < cardinality(); ++i) {
            const PointRef p = point(i);
            out.write(p.seq.data(), static_cast<std::streamsize>(p.seq.size()));
            out.put('\n');
        }
        break;
    }
    }
}

PointRef Dataset::point(std::size_t position) const {
    if (kind_ == PointKind::vector) {
        return PointRef::of_vector(
            std::span<const float>(values_.data() + position * dimensionality_, dimensionality_));
    }
    const std::uint64_t begin = seq_offsets_[position];
    const std::uint64_t end = seq_offsets_[position + 1];
    return PointRef::of_sequence(std::string_view(blob_.data() + begin, end - begin));
}

bool Dataset::is_permuted() const {
    for (std::size_t i = 0; i < permutation_.size(); ++i) {
        if (permutation_[i] != i) return true;
    }
    return false;
}

void Dataset::apply_permutation(std::span<const std::uint64_t> order) {
    const std::size_t n = cardinality();
    if (order.size() != n) input_error("permutation size does not match cardinality");
    std::vector<bool> seen(n, false);
    for (const std::uint64_t o : order) {
        if (o >= n || seen[o]) input_error("permutation is not a bijection on [0, cardinality)");
        seen[o] = true;
    }
    if (kind_ == PointKind::vector) {
        std::vector<float> next(values_.size());
        for (std::size_t i = 0; i < n; ++i) {
            std::memcpy(next.data() + i * dimensionality_, values_.data() + order[i] * dimensionality_,
                        dimensionality_ * sizeof(float));
        }
        values_ = std::move(next);
    } else {
        std::string next_blob;
        next_blob.reserve(blob_.size());
        std::vector<std::uint64_t> next_offsets;
        next_offsets.reserve(n + 1);
        next_offsets.push_back(0);
        for (std::size_t i = 0; i < n; ++i) {
            const PointRef p = point(order[i]);
            next_blob += p.seq;
            next_offsets.push_back(next_blob.size());
        }
        blob_ = std::move(next_blob);
        seq_offsets_ = std::move(next_offsets);
    }
    std::vector<std::uint64_t> next_perm(n);
    for (std::size_t i = 0; i < n; ++i) next_perm[i] = permutation_[order[i]];
    permutation_ = std::move(next_perm);
    for (std::size_t i = 0; i < n; ++i) inverse_[permutation_[i]] = i;
}

Dataset Dataset::subsample(std::size_t n, std::uint64_t seed) const {
    if (n == 0) input_error("subsample size must be positive");
    if (n > cardinality()) {
        input_error("subsample size " + std::to_string(n) + " exceeds cardinality " +
                    std::to_string(cardinality()));
    }
    std::mt19937_64 rng(derive_seed(seed, cardinality(), n));
    std::vector<std::uint64_t> idx(cardinality());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(n);
    if (kind_ == PointKind::vector) {
        std::vector<float> values(n * dimensionality_);
        for (std::size_t i = 0; i < n; ++i) {
            std::memcpy(values.data() + i * dimensionality_,
                        values_.data() + idx[i] * dimensionality_, dimensionality_ * sizeof(float));
        }
        return from_vectors(name_, std::move(values), dimensionality_);
    }
    std::vector<std::string> seqs(n);
    for (std::size_t i = 0; i < n; ++i) seqs[i] = std::string(point(idx[i]).seq);
    return from_sequences(name_, seqs);
}

void save_ground_truth(const std::filesystem::path& path, const GroundTruth& gt) {
    std::ofstream out = open_out(path, false);
    for (std::size_t q = 0; q < gt.per_query.size(); ++q) {
        nlohmann::json line;
        line["query"] = q;
        nlohmann::json neighbors = nlohmann::json::array();
        for (const auto& [idx, dist] : gt.per_query[q]) {
            neighbors.push_back(nlohmann::json::array({idx, dist}));
        }
        line["neighbors"] = std::move(neighbors);
        out << line.dump() << '\n';
    }
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
    std::ifstream in = open_in(path, false);
    GroundTruth gt;
    std::string line;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("query") || !j.contains("neighbors")) {
            input_error("malformed ground-truth line in " + path.string());
        }
        if (j["query"].get<std::size_t>() != expected) {
            input_error("ground-truth queries out of order in " + path.string());
        }
        ++expected;
        std::vector<std::pair<std::uint64_t, double>> neighbors;
        for (const auto& pair : j["neighbors"]) {
            neighbors.emplace_back(pair.at(0).get<std::uint64_t>(), pair.at(1).get<double>());
        }
        gt.k = std::max(gt.k, neighbors.size());
        gt.per_query.push_back(std::move(neighbors));
    }
    return gt;
}

double recall(std::span<const std::pair<std::uint64_t, double>> result,
              std::span<const std::pair<std::uint64_t, double>> truth, std::size_t k) {
    if (k == 0 || truth.empty()) return 1.0;
    const std::size_t kt = std::min(k, truth.size());
    const double kth = truth[kt - 1].second;
    std::size_t correct = 0;
    for (const auto& [idx, dist] : result) {
        if (dist <= kth) ++correct;
    }
    correct = std::min(correct, kt);
    return static_cast<double>(correct) / static_cast<double>(kt);
}

} // namespace cakes
