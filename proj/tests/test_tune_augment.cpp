#include "cakes/augment.hpp"
#include "cakes/gen.hpp"
#include "cakes/tune.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cstring>

using namespace cakes;

TEST_CASE("auto_tune") {
    const Dataset data = gen_uniform_hypercube(1200, 4, 61);
    const Tree tree = build(data, Metric::by_name("euclidean"), {}, Strategy::unbalanced, 62);
    const Searcher searcher(tree);

    SUBCASE("panel comes from the requested depth") {
        const TuningResult r = auto_tune(searcher, 10, 3);
        std::size_t at_depth = 0;
        for (const Cluster& c : tree.clusters()) at_depth += c.depth == 3;
        CHECK(r.panel.size() == at_depth);
        CHECK_FALSE(r.panel.empty());
        CHECK(r.k_used == 10);
    }
    SUBCASE("the choice minimizes the measured time") {
        const TuningResult r = auto_tune(searcher, 10);
        REQUIRE(r.times_us.size() == 3);
        double chosen_time = 0;
        for (const auto& [algo, t] : r.times_us) {
            if (algo == r.chosen) chosen_time = t;
        }
        for (const auto& [algo, t] : r.times_us) CHECK(chosen_time <= t);
    }
    SUBCASE("a depth-zero panel is the root center alone") {
        const TuningResult r = auto_tune(searcher, 5, 0);
        REQUIRE(r.panel.size() == 1);
        CHECK(r.panel[0] == tree.root().center);
    }
    SUBCASE("never errors for clipped k on any built tree") {
        for (const std::size_t k : {1, 10, 100}) {
            const Dataset tiny = gen_uniform_hypercube(37, 3, 63);
            const Tree small = build(tiny, Metric::by_name("euclidean"));
            const Searcher s(small);
            const TuningResult r = auto_tune(s, std::min(k, tiny.cardinality()));
            CHECK(r.k_used <= tiny.cardinality());
        }
    }
}

TEST_CASE("augment") {
    const Dataset base = gen_uniform_hypercube(40, 8, 64);

    SUBCASE("multiplier 1 is the identity") {
        const Dataset out = augment(base, {1, 0.05, 9});
        REQUIRE(out.cardinality() == base.cardinality());
        CHECK(std::memcmp(out.vector_data().data(), base.vector_data().data(),
                          base.vector_data().size() * sizeof(float)) == 0);
    }
    SUBCASE("cardinality scales with the multiplier") {
        for (const std::uint64_t m : {1, 2, 4, 8}) {
            CHECK(augment(base, {m, 0.05, 9}).cardinality() == m * base.cardinality());
        }
    }
    SUBCASE("synthetic points stay within epsilon of their source") {
        const double eps = 0.01;
        const Dataset out = augment(base, {8, eps, 10});
        const std::size_t n = base.cardinality();
        for (std::size_t j = n; j < out.cardinality(); ++j) {
            const std::size_t source = j % n;
            CHECK(euclidean(out.point(j).vec, out.point(source).vec) <= eps);
        }
    }
    SUBCASE("deterministic under a fixed seed") {
        const Dataset a = augment(base, {4, 0.02, 11});
        const Dataset b = augment(base, {4, 0.02, 11});
        CHECK(std::memcmp(a.vector_data().data(), b.vector_data().data(),
                          a.vector_data().size() * sizeof(float)) == 0);
    }
    SUBCASE("k-NN of a well-separated source finds itself and its satellites") {
        // base points on a coarse grid, gaps far beyond 2*epsilon
        std::vector<float> grid;
        for (int i = 0; i < 4; ++i) {
            grid.push_back(static_cast<float>(i) * 10.0f);
            grid.push_back(0.0f);
        }
        const Dataset separated = Dataset::from_vectors("grid", std::move(grid), 2);
        const double eps = 0.01;
        const std::uint64_t m = 3;
        const Dataset out = augment(separated, {m, eps, 12});
        const Metric euclid = Metric::by_name("euclidean");
        for (std::size_t src = 0; src < separated.cardinality(); ++src) {
            const auto knn = oracles::brute_knn(out, euclid, out.point(src), m);
            CHECK(knn[0].first == src);
            CHECK(knn[0].second == 0.0);
            for (const auto& [idx, dist] : knn) CHECK(dist <= eps);
        }
    }
    SUBCASE("sequence datasets are rejected") {
        const Dataset seqs = Dataset::from_sequences("s", {"AC", "GT"});
        CHECK_THROWS_AS(augment(seqs, {2, 0.1, 0}), std::invalid_argument);
    }
    SUBCASE("bad parameters are rejected") {
        CHECK_THROWS_AS(augment(base, {0, 0.1, 0}), std::invalid_argument);
        CHECK_THROWS_AS(augment(base, {2, 0.0, 0}), std::invalid_argument);
    }
}

TEST_CASE("generators are deterministic and extendable") {
    const Dataset a = gen_uniform_hypercube(100, 5, 71);
    const Dataset b = gen_uniform_hypercube(120, 5, 71);
    CHECK(std::memcmp(a.vector_data().data(), b.vector_data().data(),
                      a.vector_data().size() * sizeof(float)) == 0);

    const Dataset m1 = gen_manifold(80, 16, 2, 72);
    const Dataset m2 = gen_manifold(90, 16, 2, 72);
    CHECK(std::memcmp(m1.vector_data().data(), m2.vector_data().data(),
                      m1.vector_data().size() * sizeof(float)) == 0);

    const Dataset s1 = gen_sequences(50, 8, "ACGT", 73);
    const Dataset s2 = gen_sequences(50, 8, "ACGT", 73);
    for (std::size_t i = 0; i < 50; ++i) CHECK(s1.point(i).seq == s2.point(i).seq);

    CHECK_THROWS_AS(gen_manifold(10, 4, 5, 0), std::invalid_argument);
}
