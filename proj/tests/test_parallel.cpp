// The parallel kernels must agree with the serial reference paths exactly:
// same neighbors, same instrumentation, and schedule-independent tree builds.

#include "cakes/augment.hpp"
#include "cakes/gen.hpp"
#include "cakes/search.hpp"

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

using namespace cakes;
namespace fs = std::filesystem;

namespace {

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

bool same_reports(const std::vector<SearchReport>& a, const std::vector<SearchReport>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].neighbors != b[i].neighbors) return false;
        if (a[i].distance_count != b[i].distance_count) return false;
    }
    return true;
}

} // namespace

TEST_CASE("parallel tree build matches the serial result byte for byte") {
    // large enough to spawn subtree tasks
    const Dataset d = gen_uniform_hypercube(12000, 6, 81);
    const fs::path dir = fs::temp_directory_path() / "cakes_parallel_tests";
    fs::create_directories(dir);
    const Tree a = build(d, Metric::by_name("euclidean"), {}, Strategy::unbalanced, 82);
    const Tree b = build(d, Metric::by_name("euclidean"), {}, Strategy::unbalanced, 82);
    save_tree(a, dir / "a.tree");
    save_tree(b, dir / "b.tree");
    CHECK(file_bytes(dir / "a.tree") == file_bytes(dir / "b.tree"));
}

TEST_CASE("batch drivers return identical reports for any worker count") {
    const Dataset data = gen_manifold(4000, 10, 3, 83);
    const Metric euclid = Metric::by_name("euclidean");
    const Tree tree = build(data, euclid, {}, Strategy::unbalanced, 84);
    const Searcher searcher(tree);
    const Dataset queries = gen_manifold(60, 10, 3, 83);

    for (const KnnAlgo algo : cakes_algos()) {
        const auto serial = knn_batch(searcher, queries, 10, algo, 1);
        const auto parallel = knn_batch(searcher, queries, 10, algo, 4);
        CHECK(same_reports(serial, parallel));
    }
    const std::vector<double> rho = {0.05};
    CHECK(same_reports(rnn_batch(searcher, queries, rho, 1),
                       rnn_batch(searcher, queries, rho, 4)));
    CHECK(same_reports(linear_knn_batch(data, euclid, queries, 10, 1),
                       linear_knn_batch(data, euclid, queries, 10, 4)));
}

TEST_CASE("parallel augmentation matches its own rerun") {
    const Dataset base = gen_uniform_hypercube(600, 8, 85);
    const Dataset a = augment(base, {4, 0.01, 86});
    const Dataset b = augment(base, {4, 0.01, 86});
    CHECK(std::memcmp(a.vector_data().data(), b.vector_data().data(),
                      a.vector_data().size() * sizeof(float)) == 0);
}
