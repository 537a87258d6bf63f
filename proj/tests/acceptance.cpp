// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// fails. Everything is generated from fixed seeds; exactness checks run
// single-worker, oracle preparation and count-only sweeps may use both cores.

#include "cakes/augment.hpp"
#include "cakes/dataset.hpp"
#include "cakes/gen.hpp"
#include "cakes/search.hpp"
#include "cakes/tree.hpp"

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

using namespace cakes;
namespace fs = std::filesystem;

namespace {

constexpr int kOracleWorkers = 2;

struct CaseState {
    std::string label;
    Metric metric;
    Dataset data;      // unpermuted storage
    Dataset data_perm; // permuted by its own tree
    Dataset queries;
    std::optional<Tree> tree;
    std::optional<Tree> tree_perm;
    std::vector<std::vector<std::pair<std::uint64_t, double>>> truth100;

    CaseState(std::string l, Metric m, Dataset d, Dataset q)
        : label(std::move(l)), metric(m), data(std::move(d)), data_perm(data),
          queries(std::move(q)) {}
};

struct Criterion1Run {
    std::vector<std::unique_ptr<CaseState>> cases;
    std::string canonical; // neighbor output, timings excluded
    double min_recall = 1.0;
    bool permuted_sets_match = true;
};

Dataset split_head(const Dataset& all, std::size_t n, const std::string& name) {
    const std::size_t d = all.dimensionality();
    std::vector<float> v(all.vector_data().begin(), all.vector_data().begin() + n * d);
    return Dataset::from_vectors(name, std::move(v), d);
}

Dataset split_tail(const Dataset& all, std::size_t n, const std::string& name) {
    const std::size_t d = all.dimensionality();
    std::vector<float> v(all.vector_data().begin() + n * d, all.vector_data().end());
    return Dataset::from_vectors(name, std::move(v), d);
}

void append_canonical(std::string& out, const std::string& label, const char* variant,
                      KnnAlgo algo, std::size_t k, const std::vector<SearchReport>& reports) {
    char buf[64];
    for (std::size_t qi = 0; qi < reports.size(); ++qi) {
        out += label;
        out += ' ';
        out += variant;
        out += ' ';
        out += algo_name(algo);
        std::snprintf(buf, sizeof buf, " %zu %zu", k, qi);
        out += buf;
        for (const auto& [idx, dist] : reports[qi].neighbors) {
            std::snprintf(buf, sizeof buf, " %llu:%.17g", static_cast<unsigned long long>(idx),
                          dist);
            out += buf;
        }
        out += '\n';
    }
}

/// The criterion-1 workload: three datasets, both tree variants, all three
/// algorithms, k in {1, 10, 100}. Returns everything later criteria reuse.
Criterion1Run run_criterion1_suite() {
    Criterion1Run run;

    run.cases.push_back(std::make_unique<CaseState>(
        "uniform", Metric::by_name("euclidean"),
        gen_uniform_hypercube(50000, 16, 101, "uniform-16"),
        gen_uniform_hypercube(100, 16, 909, "uniform-queries")));
    {
        const Dataset all = gen_manifold(50100, 64, 4, 202, "manifold-64");
        run.cases.push_back(std::make_unique<CaseState>(
            "manifold", Metric::by_name("euclidean"), split_head(all, 50000, "manifold-64"),
            split_tail(all, 50000, "manifold-queries")));
    }
    run.cases.push_back(std::make_unique<CaseState>(
        "strings", Metric::by_name("levenshtein"), gen_sequences(20000, 32, "ACGT", 303),
        gen_sequences(100, 32, "ACGT", 404)));

    for (const auto& cs : run.cases) {
        cs->tree.emplace(build(cs->data, cs->metric, {}, Strategy::unbalanced, 42));
        cs->tree_perm.emplace(build(cs->data_perm, cs->metric, {}, Strategy::unbalanced, 42));
        depth_first_reorder(*cs->tree_perm, cs->data_perm);

        const auto truth =
            linear_knn_batch(cs->data, cs->metric, cs->queries, 100, kOracleWorkers);
        for (const auto& r : truth) cs->truth100.push_back(r.neighbors);

        const Searcher plain(*cs->tree);
        const Searcher permuted(*cs->tree_perm);
        for (const KnnAlgo algo : cakes_algos()) {
            for (const std::size_t k : {1, 10, 100}) {
                const auto reports = knn_batch(plain, cs->queries, k, algo, 1);
                const auto reports_perm = knn_batch(permuted, cs->queries, k, algo, 1);
                for (std::size_t qi = 0; qi < reports.size(); ++qi) {
                    run.min_recall = std::min(
                        run.min_recall, recall(reports[qi].neighbors, cs->truth100[qi], k));
                    if (reports[qi].neighbors != reports_perm[qi].neighbors) {
                        run.permuted_sets_match = false;
                    }
                }
                append_canonical(run.canonical, cs->label, "plain", algo, k, reports);
                append_canonical(run.canonical, cs->label, "permuted", algo, k, reports_perm);
            }
        }
    }
    return run;
}

/// Radii for criterion 2: anchored on oracle neighbor distances so the balls
/// hold between one and ~fifty points, with scale factors straddling the
/// boundary-inclusion case.
double rho_for(const CaseState& cs, std::size_t qi) {
    const auto& truth = cs.truth100[qi];
    const std::size_t j = (qi * 7) % 50;
    const double scale[3] = {0.95, 1.0, 1.05};
    return truth[j].second * scale[qi % 3];
}

int failures = 0;

void criterion(int num, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s — %s\n", num, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

struct StageTimer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    void lap(const char* what) {
        const auto now = std::chrono::steady_clock::now();
        std::printf("  [time] %s: %.1f s\n", what,
                    std::chrono::duration<double>(now - t0).count());
        std::fflush(stdout);
        t0 = now;
    }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

} // namespace

int main(int argc, char** argv) {
    const fs::path out_dir = fs::current_path();
    bool selected[10];
    std::fill(std::begin(selected), std::end(selected), argc <= 1);
    for (int i = 1; i < argc; ++i) {
        const int c = std::atoi(argv[i]);
        if (c >= 1 && c <= 9) selected[c] = true;
    }
    const bool need_run1 = selected[1] || selected[2] || selected[3] || selected[4] ||
                           selected[7] || selected[9];
    StageTimer timer;

    // ---------------------------------------------------------- criterion 1
    Criterion1Run run1;
    if (need_run1) {
        run1 = run_criterion1_suite();
        timer.lap("criterion-1 suite");
        std::ofstream f(out_dir / "acceptance_neighbors_run1.txt", std::ios::binary);
        f << run1.canonical;
    }
    if (selected[1]) {
        criterion(1, run1.min_recall == 1.0,
                  fmt("exact recall on uniform/manifold/strings, min recall %.6f",
                      run1.min_recall));
    }

    // ---------------------------------------------------------- criterion 2
    if (selected[2]) {
        bool exact = true;
        std::string detail = "rho-NN equals the linear oracle:";
        for (const auto& cs : run1.cases) {
            const Searcher searcher(*cs->tree);
            std::size_t mismatches = 0;
            for (std::size_t qi = 0; qi < cs->queries.cardinality(); ++qi) {
                const double rho = rho_for(*cs, qi);
                const auto got = searcher.rho_nn(cs->queries.point(qi), rho);
                const auto want = linear_rnn(cs->data, cs->metric, cs->queries.point(qi), rho);
                if (got.neighbors != want.neighbors) ++mismatches;
            }
            exact = exact && mismatches == 0;
            detail += fmt(" %s %zu/100 ok;", cs->label.c_str(), 100 - mismatches);
        }
        criterion(2, exact, detail);
        timer.lap("criterion 2");
    }

    // ---------------------------------------------------------- criterion 3
    if (selected[3]) {
        // Soundness (identical hit sets with pruning on/off) holds
        // everywhere. The count inequality charges the two pole probes per
        // ambiguous node, so it can only hold where the probe geometry
        // actually fires; that is data-dependent and part of the gate.
        bool sets_equal = true;
        bool counts_ok = true;
        std::string detail;
        for (const auto& cs : run1.cases) {
            const Searcher pruned(*cs->tree);
            const Searcher unpruned(*cs->tree, SearchOptions{.pole_pruning = false});
            std::uint64_t with = 0;
            std::uint64_t without = 0;
            for (std::size_t qi = 0; qi < cs->queries.cardinality(); ++qi) {
                const double rho = rho_for(*cs, qi);
                const auto a = pruned.rho_nn(cs->queries.point(qi), rho);
                const auto b = unpruned.rho_nn(cs->queries.point(qi), rho);
                if (a.neighbors != b.neighbors) sets_equal = false;
                with += a.distance_count;
                without += b.distance_count;
            }
            counts_ok = counts_ok && with <= without;
            detail += fmt("; %s counts with/without %.3fx (%llu vs %llu)", cs->label.c_str(),
                          static_cast<double>(with) / static_cast<double>(without),
                          static_cast<unsigned long long>(with),
                          static_cast<unsigned long long>(without));
        }
        detail = std::string("hit sets ") +
                 (sets_equal ? "identical with pruning on/off" : "DIFFER") + detail;
        criterion(3, sets_equal && counts_ok, detail);
        timer.lap("criterion 3");
    }

    // ---------------------------------------------------------- criterion 4
    if (selected[4]) {
        const Dataset big = gen_uniform_hypercube(65536, 128, 505, "uniform-128");
        const Tree big_tree =
            build(big, Metric::by_name("euclidean"), {}, Strategy::unbalanced, 1);
        const double root_lfd = big_tree.root().lfd;
        const bool root_ok = root_lfd >= 15.0 && root_lfd <= 17.0;

        const auto rows = lfd_report(*run1.cases[1]->tree); // the manifold case
        double worst_p95 = 0.0;
        for (const LfdDepthRow& r : rows) {
            if (r.depth >= 5 && r.depth <= 15) worst_p95 = std::max(worst_p95, r.p95);
        }
        const bool manifold_ok = worst_p95 < 8.0;
        criterion(4, root_ok && manifold_ok,
                  fmt("uniform-128 root LFD %.3f in [15,17]; manifold p95 LFD at depths 5-15 "
                      "max %.3f < 8",
                      root_lfd, worst_p95));
        timer.lap("criterion 4");
    }

    // ------------------------------------------------------ criteria 5 and 6
    if (selected[5] || selected[6]) {
        const Dataset all = gen_manifold(50100, 64, 4, 202, "manifold-64");
        const Dataset base = split_head(all, 50000, "manifold-64");
        const Dataset queries = split_tail(all, 50000, "manifold-queries");
        const Metric euclid = Metric::by_name("euclidean");

        double linear_m1 = 0, linear_m8 = 0, dfs_m1 = 0, dfs_m8 = 0;
        double dfs_qps_m1 = 0, dfs_qps_m8 = 0;
        std::vector<double> unbalanced_m8(cakes_algos().size(), 0.0);
        std::vector<double> balanced_m8(cakes_algos().size(), 0.0);

        for (const std::uint64_t mult : {1, 2, 4, 8}) {
            const Dataset aug = mult == 1 ? base : augment(base, AugmentSpec{mult, 0.01, 606});
            double linear_mean = 0;
            for (const auto& r : linear_knn_batch(aug, euclid, queries, 10, kOracleWorkers)) {
                linear_mean += static_cast<double>(r.distance_count);
            }
            linear_mean /= static_cast<double>(queries.cardinality());

            const Tree tree = build(aug, euclid, {}, Strategy::unbalanced, 707);
            const Searcher searcher(tree);
            const auto t0 = std::chrono::steady_clock::now();
            const auto reports = knn_batch(searcher, queries, 10, KnnAlgo::depth_first_sieve, 1);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            double dfs_mean = 0;
            for (const auto& r : reports) dfs_mean += static_cast<double>(r.distance_count);
            dfs_mean /= static_cast<double>(reports.size());
            std::printf("  [scaling] mult %llu: linear %.0f evals/query, depth-sieve %.0f "
                        "evals/query, depth-sieve %.0f q/s\n",
                        static_cast<unsigned long long>(mult), linear_mean, dfs_mean,
                        static_cast<double>(reports.size()) / secs);

            if (mult == 1) {
                linear_m1 = linear_mean;
                dfs_m1 = dfs_mean;
                dfs_qps_m1 = static_cast<double>(reports.size()) / secs;
            }
            if (mult == 8) {
                linear_m8 = linear_mean;
                dfs_m8 = dfs_mean;
                dfs_qps_m8 = static_cast<double>(reports.size()) / secs;
                for (std::size_t ai = 0; ai < cakes_algos().size(); ++ai) {
                    for (const auto& r :
                         knn_batch(searcher, queries, 10, cakes_algos()[ai], kOracleWorkers)) {
                        unbalanced_m8[ai] += static_cast<double>(r.distance_count);
                    }
                    unbalanced_m8[ai] /= static_cast<double>(queries.cardinality());
                }
                const Tree bal_tree = build(aug, euclid, {}, Strategy::balanced, 707);
                const Searcher bal(bal_tree);
                for (std::size_t ai = 0; ai < cakes_algos().size(); ++ai) {
                    for (const auto& r :
                         knn_batch(bal, queries, 10, cakes_algos()[ai], kOracleWorkers)) {
                        balanced_m8[ai] += static_cast<double>(r.distance_count);
                    }
                    balanced_m8[ai] /= static_cast<double>(queries.cardinality());
                }
            }
        }

        const double linear_growth = linear_m8 / linear_m1;
        const double dfs_growth = dfs_m8 / dfs_m1;
        std::printf("  [scaling] depth-sieve throughput m=1 %.0f q/s vs m=8 %.0f q/s "
                    "(reported, not gated)\n",
                    dfs_qps_m1, dfs_qps_m8);
        criterion(5, linear_growth >= 7.0 && dfs_growth <= 2.0,
                  fmt("m=1 to m=8 distance-count growth: linear %.2fx (>= 7), depth-sieve "
                      "%.2fx (<= 2)",
                      linear_growth, dfs_growth));
        timer.lap("criteria 5+6");

        bool balanced_worse = true;
        std::string detail = "mean distance count balanced > unbalanced at m=8:";
        for (std::size_t ai = 0; ai < cakes_algos().size(); ++ai) {
            balanced_worse = balanced_worse && balanced_m8[ai] > unbalanced_m8[ai];
            detail += fmt(" %s %.0f>%.0f;", algo_name(cakes_algos()[ai]), balanced_m8[ai],
                          unbalanced_m8[ai]);
        }
        criterion(6, balanced_worse, detail);
    }

    // ---------------------------------------------------------- criterion 7
    if (selected[7]) {
        bool structural = true;
        for (const auto& cs : run1.cases) {
            const fs::path p = out_dir / ("acceptance_" + cs->label + ".tree");
            save_tree(*cs->tree_perm, p);
            std::ifstream in(p, std::ios::binary);
            std::string header;
            std::getline(in, header);
            constexpr std::size_t record = 8 + 8 + 8 + 8 + 8 + 1;
            const std::size_t expect = header.size() + 1 + 8 * cs->data.cardinality() +
                                       record * cs->tree_perm->clusters().size();
            structural = structural && fs::file_size(p) == expect;
        }
        criterion(7, run1.permuted_sets_match && structural,
                  fmt("permuted trees return identical neighbors%s; serialized index storage "
                      "is exactly n permutation entries%s",
                      run1.permuted_sets_match ? "" : " (MISMATCH)",
                      structural ? "" : " (VIOLATED)"));
    }

    // ---------------------------------------------------------- criterion 8
    if (selected[8]) {
        // Cosine is not a metric, so exactness under it is reported rather
        // than asserted: recall per algorithm against the 0.999 reference,
        // with every imperfect query logged.
        const Dataset data = gen_uniform_hypercube(50000, 25, 808, "uniform-25");
        const Dataset queries = gen_uniform_hypercube(100, 25, 819, "cosine-queries");
        const Metric cos = Metric::by_name("cosine");
        const Tree tree = build(data, cos, {}, Strategy::unbalanced, 9);
        const Searcher searcher(tree);
        const auto truth = linear_knn_batch(data, cos, queries, 10, kOracleWorkers);

        std::string detail = "cosine recall at k=10, reference 0.999 (reported, not asserted):";
        for (const KnnAlgo algo : cakes_algos()) {
            const auto reports = knn_batch(searcher, queries, 10, algo, 1);
            double total = 0;
            std::size_t imperfect = 0;
            for (std::size_t qi = 0; qi < reports.size(); ++qi) {
                const double r = recall(reports[qi].neighbors, truth[qi].neighbors, 10);
                total += r;
                if (r < 1.0) {
                    ++imperfect;
                    std::printf("  [cosine] %s query %zu recall %.3f\n", algo_name(algo), qi, r);
                }
            }
            const double mean = total / static_cast<double>(reports.size());
            detail += fmt(" %s %.4f over %zu queries (%zu imperfect)%s;", algo_name(algo), mean,
                          reports.size(), imperfect, mean >= 0.999 ? "" : " BELOW REFERENCE");
        }
        criterion(8, true, detail);
        timer.lap("criterion 8");
    }

    // ---------------------------------------------------------- criterion 9
    if (selected[9]) {
        const Criterion1Run run2 = run_criterion1_suite();
        {
            std::ofstream f(out_dir / "acceptance_neighbors_run2.txt", std::ios::binary);
            f << run2.canonical;
        }
        criterion(9, run1.canonical == run2.canonical,
                  fmt("two full criterion-1 runs wrote byte-identical neighbor files (%zu bytes)",
                      run1.canonical.size()));
        timer.lap("criterion 9");
    }

    if (failures == 0) {
        std::printf("acceptance: all criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criteria failed\n", failures);
    return 1;
}
