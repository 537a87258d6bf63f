#include "cakes/augment.hpp"
#include "cakes/dataset.hpp"
#include "cakes/gen.hpp"
#include "cakes/search.hpp"
#include "cakes/tree.hpp"
#include "cakes/tune.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using namespace cakes;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string distance;
    std::string format = "raw-f32";
};

Metric metric_from(const GlobalOpts& g) {
    if (g.distance.empty()) throw std::invalid_argument("missing --distance");
    return Metric::by_name(g.distance);
}

Dataset load_data(const std::string& path, const std::string& format) {
    return Dataset::load(path, format_by_name(format));
}

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write: " + path);
    return out;
}

nlohmann::json neighbors_json(const std::vector<std::pair<std::uint64_t, double>>& neighbors) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [idx, dist] : neighbors) arr.push_back(nlohmann::json::array({idx, dist}));
    return arr;
}

void write_results(std::ostream& out, const std::vector<SearchReport>& reports,
                   const std::string& algo, const char* param_key,
                   const nlohmann::json& param_value) {
    for (std::size_t i = 0; i < reports.size(); ++i) {
        nlohmann::json line;
        line["query"] = i;
        line["algo"] = algo;
        line[param_key] = param_value;
        line["neighbors"] = neighbors_json(reports[i].neighbors);
        line["distance_count"] = reports[i].distance_count;
        line["elapsed_us"] = reports[i].elapsed_us;
        out << line.dump() << '\n';
    }
}

nlohmann::json tuning_json(const TuningResult& tuning) {
    nlohmann::json times;
    for (const auto& [algo, us] : tuning.times_us) times[algo_name(algo)] = us;
    return nlohmann::json{{"chosen", algo_name(tuning.chosen)},
                          {"times_us", times},
                          {"panel_size", tuning.panel.size()},
                          {"k", tuning.k_used}};
}

// ---------------------------------------------------------------- gen

struct GenOpts {
    std::string kind;
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t d_int = 0;
    std::string out;
};

void run_gen(const GlobalOpts& g, const GenOpts& o) {
    Dataset data = [&] {
        if (o.kind == "uniform-hypercube") {
            return gen_uniform_hypercube(o.n, o.d, g.seed);
        }
        if (o.kind == "manifold") {
            if (o.d_int == 0) throw std::invalid_argument("manifold requires --d-int");
            return gen_manifold(o.n, o.d, o.d_int, g.seed);
        }
        throw std::invalid_argument("unknown --kind: " + o.kind);
    }();
    data.save(o.out, format_by_name(g.format));
    std::cout << "wrote " << data.cardinality() << " points of dimension " << data.dimensionality()
              << " to " << o.out << '\n';
}

// ---------------------------------------------------------------- augment

struct AugmentOpts {
    std::string data;
    std::uint64_t multiplier = 1;
    double epsilon = 0.0;
    std::string out;
    std::string sidecar;
};

void run_augment(const GlobalOpts& g, const AugmentOpts& o) {
    const Dataset base = load_data(o.data, g.format);
    const Dataset out = augment(base, AugmentSpec{o.multiplier, o.epsilon, g.seed});
    out.save(o.out, format_by_name(g.format));

    nlohmann::json sidecar;
    sidecar["multiplier"] = o.multiplier;
    sidecar["epsilon"] = o.epsilon;
    sidecar["seed"] = g.seed;
    sidecar["cardinality"] = out.cardinality();
    nlohmann::json sources = nlohmann::json::array();
    for (std::size_t j = base.cardinality(); j < out.cardinality(); ++j) {
        sources.push_back(j % base.cardinality());
    }
    sidecar["sources"] = std::move(sources);
    std::ofstream side(o.sidecar.empty() ? o.out + ".sources.json" : o.sidecar);
    side << sidecar.dump() << '\n';

    std::cout << "wrote " << out.cardinality() << " points to " << o.out << '\n';
}

// ---------------------------------------------------------------- build

struct BuildOpts {
    std::string data;
    std::string strategy = "unbalanced";
    bool permute = false;
    std::uint64_t min_cardinality = 1;
    double min_radius = 0.0;
    std::int64_t max_depth = -1;
    std::string out;
};

void run_build(const GlobalOpts& g, const BuildOpts& o) {
    Dataset data = load_data(o.data, g.format);
    const Metric metric = metric_from(g);
    PartitionCriteria criteria;
    criteria.min_cardinality = o.min_cardinality;
    criteria.min_radius = o.min_radius;
    if (o.max_depth >= 0) criteria.max_depth = static_cast<std::uint32_t>(o.max_depth);

    const auto t0 = Clock::now();
    Tree tree = build(data, metric, criteria, strategy_by_name(o.strategy), g.seed);
    if (o.permute) depth_first_reorder(tree, data);
    const double elapsed = seconds_since(t0);
    save_tree(tree, o.out);

    const auto [leaves, mean_radius] = metric_entropy(tree);
    std::cout << "clusters: " << tree.clusters().size() << '\n';
    std::cout << "metric entropy: " << leaves << " leaves, mean radius " << mean_radius << '\n';
    std::cout << "max depth: " << tree.max_depth() << '\n';
    std::cout << "build time: " << elapsed << " s\n";
}

// ---------------------------------------------------------------- search

struct SearchOpts {
    std::string tree;
    std::string data;
    std::string queries;
    std::string queries_format;
    std::string algo = "depth-sieve";
    std::int64_t k = -1;
    double radius = -1.0;
    std::string out;
    int workers = 1;
};

void run_search(const GlobalOpts& g, const SearchOpts& o) {
    if ((o.k < 0) == (o.radius < 0)) {
        throw std::invalid_argument("give exactly one of --k and --radius");
    }
    Dataset data = load_data(o.data, g.format);
    const Tree tree = load_tree(o.tree, data);
    const Dataset queries =
        load_data(o.queries, o.queries_format.empty() ? g.format : o.queries_format);
    const Searcher searcher(tree);

    std::ofstream file;
    if (!o.out.empty()) {
        file.open(o.out);
        if (!file) throw std::invalid_argument("cannot write: " + o.out);
    }
    std::ostream& out = o.out.empty() ? std::cout : file;

    if (o.radius >= 0) {
        if (o.algo == "linear") {
            std::vector<SearchReport> reports(queries.cardinality());
            for (std::size_t i = 0; i < queries.cardinality(); ++i) {
                reports[i] = linear_rnn(data, tree.metric(), queries.point(i), o.radius);
            }
            write_results(out, reports, "linear", "radius", o.radius);
        } else {
            const std::vector<double> rhos = {o.radius};
            const auto reports = rnn_batch(searcher, queries, rhos, o.workers);
            write_results(out, reports, "rho-nn", "radius", o.radius);
        }
        return;
    }

    const auto k = static_cast<std::size_t>(o.k);
    std::string algo_label = o.algo;
    KnnAlgo algo;
    if (o.algo == "auto") {
        const TuningResult tuning = auto_tune(searcher, k);
        std::cerr << tuning_json(tuning).dump() << '\n';
        std::cerr << "auto-tune chose: " << algo_name(tuning.chosen) << '\n';
        algo = tuning.chosen;
        algo_label = algo_name(algo);
    } else {
        algo = algo_by_name(o.algo);
    }
    const auto reports = knn_batch(searcher, queries, k, algo, o.workers);
    write_results(out, reports, algo_label, "k", k);
}

// ---------------------------------------------------------------- ground-truth

struct GroundTruthOpts {
    std::string data;
    std::string queries;
    std::string queries_format;
    std::size_t k = 10;
    std::string out;
    int workers = 1;
};

void run_ground_truth(const GlobalOpts& g, const GroundTruthOpts& o) {
    const Dataset data = load_data(o.data, g.format);
    const Metric metric = metric_from(g);
    const Dataset queries =
        load_data(o.queries, o.queries_format.empty() ? g.format : o.queries_format);
    const auto reports = linear_knn_batch(data, metric, queries, o.k, o.workers);

    GroundTruth gt;
    gt.k = o.k;
    gt.distance = metric.name();
    for (const auto& r : reports) gt.per_query.push_back(r.neighbors);
    save_ground_truth(o.out, gt);
    std::cout << "wrote ground truth for " << queries.cardinality() << " queries to " << o.out
              << '\n';
}

// ---------------------------------------------------------------- bench

struct BenchOpts {
    std::string data;
    std::string queries;
    std::string queries_format;
    std::vector<std::size_t> ks = {10};
    std::vector<std::string> algos = {"repeated-rnn", "breadth-sieve", "depth-sieve", "linear"};
    std::string strategy = "unbalanced";
    bool permute = false;
    std::vector<std::uint64_t> augment_mults = {1};
    double augment_epsilon = 0.01;
    bool count_distances = false;
    std::string out;
    std::string lfd_out;
    int workers = 1;
};

void run_bench(const GlobalOpts& g, const BenchOpts& o) {
    const Dataset base = load_data(o.data, g.format);
    const Metric metric = metric_from(g);
    const Dataset queries =
        load_data(o.queries, o.queries_format.empty() ? g.format : o.queries_format);

    std::ofstream csv = open_csv(o.out);
    csv << "dataset,distance,strategy,permuted,algo,k,cardinality,qps,recall,"
           "mean_distance_count\n";
    std::ofstream lfd_csv;
    if (!o.lfd_out.empty()) {
        lfd_csv = open_csv(o.lfd_out);
        lfd_csv << "cardinality,depth,min,p5,p25,p50,p75,p95,max,points\n";
    }

    std::size_t k_max = 1;
    for (const std::size_t k : o.ks) k_max = std::max(k_max, k);

    for (const std::uint64_t mult : o.augment_mults) {
        Dataset data = mult == 1 ? load_data(o.data, g.format)
                                 : augment(base, AugmentSpec{mult, o.augment_epsilon, g.seed});
        Tree tree = build(data, metric, {}, strategy_by_name(o.strategy), g.seed);
        if (o.permute) depth_first_reorder(tree, data);
        const Searcher searcher(tree);

        if (lfd_csv.is_open()) {
            for (const LfdDepthRow& row : lfd_report(tree)) {
                lfd_csv << data.cardinality() << ',' << row.depth << ',' << row.min << ','
                        << row.p5 << ',' << row.p25 << ',' << row.p50 << ',' << row.p75 << ','
                        << row.p95 << ',' << row.max << ',' << row.points << '\n';
            }
        }

        const auto truth = linear_knn_batch(data, metric, queries, k_max, o.workers);
        for (const std::size_t k : o.ks) {
            for (const std::string& name : o.algos) {
                const KnnAlgo algo = algo_by_name(name);
                const auto t0 = Clock::now();
                const auto reports = algo == KnnAlgo::linear
                                         ? linear_knn_batch(data, metric, queries, k, o.workers)
                                         : knn_batch(searcher, queries, k, algo, o.workers);
                const double elapsed = seconds_since(t0);

                double recall_sum = 0.0;
                double count_sum = 0.0;
                for (std::size_t i = 0; i < reports.size(); ++i) {
                    recall_sum += recall(reports[i].neighbors, truth[i].neighbors, k);
                    count_sum += static_cast<double>(reports[i].distance_count);
                }
                const auto q = static_cast<double>(reports.size());
                char row[512];
                std::snprintf(row, sizeof row, "%s,%s,%s,%d,%s,%zu,%zu,%.3f,%.6f,%.3f\n",
                              base.name().c_str(), metric.name(), o.strategy.c_str(),
                              o.permute ? 1 : 0, name.c_str(), k, data.cardinality(),
                              q / elapsed, recall_sum / q, count_sum / q);
                csv << row;
            }
        }
    }
}

// ---------------------------------------------------------------- lfd-report

struct LfdOpts {
    std::string tree;
    std::string out;
};

void run_lfd_report(const LfdOpts& o) {
    const TreeFile file = read_tree_file(o.tree);
    std::ofstream csv = open_csv(o.out);
    csv << "depth,min,p5,p25,p50,p75,p95,max,points\n";
    for (const LfdDepthRow& row : lfd_report(file.clusters)) {
        csv << row.depth << ',' << row.min << ',' << row.p5 << ',' << row.p25 << ',' << row.p50
            << ',' << row.p75 << ',' << row.p95 << ',' << row.max << ',' << row.points << '\n';
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact k-NN and rho-NN search over metric cluster trees"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "RNG seed (default 0)");
    app.add_option("--distance", g.distance,
                   "distance function: euclidean, cosine, hamming, levenshtein, dtw");
    app.add_option("--format", g.format, "dataset file format: raw-f32, csv, sequences")
        ->default_str("raw-f32");

    std::function<void()> action;

    GenOpts gen_o;
    auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
    gen_cmd->fallthrough();
    gen_cmd->add_option("--kind", gen_o.kind, "uniform-hypercube or manifold")->required();
    gen_cmd->add_option("--n", gen_o.n, "number of points")->required();
    gen_cmd->add_option("--d", gen_o.d, "embedding dimension")->required();
    gen_cmd->add_option("--d-int", gen_o.d_int, "intrinsic dimension (manifold)");
    gen_cmd->add_option("--out", gen_o.out, "output dataset file")->required();
    gen_cmd->callback([&] { action = [&] { run_gen(g, gen_o); }; });

    AugmentOpts aug_o;
    auto* aug_cmd = app.add_subcommand("augment", "augment a dataset with synthetic points");
    aug_cmd->fallthrough();
    aug_cmd->add_option("--data", aug_o.data, "input dataset file")->required();
    aug_cmd->add_option("--multiplier", aug_o.multiplier, "output cardinality multiplier")
        ->required();
    aug_cmd->add_option("--epsilon", aug_o.epsilon, "noise ball radius")->required();
    aug_cmd->add_option("--out", aug_o.out, "output dataset file")->required();
    aug_cmd->add_option("--sidecar", aug_o.sidecar, "source-index sidecar (default <out>.sources.json)");
    aug_cmd->callback([&] { action = [&] { run_augment(g, aug_o); }; });

    BuildOpts build_o;
    auto* build_cmd = app.add_subcommand("build", "build a cluster tree");
    build_cmd->fallthrough();
    build_cmd->add_option("--data", build_o.data, "dataset file")->required();
    build_cmd->add_option("--strategy", build_o.strategy, "unbalanced (default) or balanced");
    build_cmd->add_flag("--permute", build_o.permute, "depth-first reorder the dataset");
    build_cmd->add_option("--min-cardinality", build_o.min_cardinality,
                          "stop splitting below this cardinality");
    build_cmd->add_option("--min-radius", build_o.min_radius, "stop splitting at this radius");
    build_cmd->add_option("--max-depth", build_o.max_depth, "stop splitting at this depth");
    build_cmd->add_option("--out", build_o.out, "output tree file")->required();
    build_cmd->callback([&] { action = [&] { run_build(g, build_o); }; });

    SearchOpts search_o;
    auto* search_cmd = app.add_subcommand("search", "run queries against a tree");
    search_cmd->fallthrough();
    search_cmd->add_option("--tree", search_o.tree, "tree file")->required();
    search_cmd->add_option("--data", search_o.data, "dataset file the tree was built on")
        ->required();
    search_cmd->add_option("--queries", search_o.queries, "query file")->required();
    search_cmd->add_option("--queries-format", search_o.queries_format,
                           "query file format (default: --format)");
    search_cmd->add_option("--algo", search_o.algo,
                           "repeated-rnn, breadth-sieve, depth-sieve, linear, or auto");
    search_cmd->add_option("--k", search_o.k, "number of neighbors");
    search_cmd->add_option("--radius", search_o.radius, "rho-NN search radius");
    search_cmd->add_option("--out", search_o.out, "results file (default stdout)");
    search_cmd->add_option("--workers", search_o.workers, "concurrent query workers (default 1)");
    search_cmd->callback([&] { action = [&] { run_search(g, search_o); }; });

    GroundTruthOpts gt_o;
    auto* gt_cmd = app.add_subcommand("ground-truth", "save linear-scan results as ground truth");
    gt_cmd->fallthrough();
    gt_cmd->add_option("--data", gt_o.data, "dataset file")->required();
    gt_cmd->add_option("--queries", gt_o.queries, "query file")->required();
    gt_cmd->add_option("--queries-format", gt_o.queries_format,
                       "query file format (default: --format)");
    gt_cmd->add_option("--k", gt_o.k, "number of neighbors")->required();
    gt_cmd->add_option("--out", gt_o.out, "output ground-truth file")->required();
    gt_cmd->add_option("--workers", gt_o.workers, "concurrent query workers (default 1)");
    gt_cmd->callback([&] { action = [&] { run_ground_truth(g, gt_o); }; });

    BenchOpts bench_o;
    auto* bench_cmd = app.add_subcommand("bench", "benchmark algorithms and emit CSV rows");
    bench_cmd->fallthrough();
    bench_cmd->add_option("--data", bench_o.data, "dataset file")->required();
    bench_cmd->add_option("--queries", bench_o.queries, "query file")->required();
    bench_cmd->add_option("--queries-format", bench_o.queries_format,
                          "query file format (default: --format)");
    bench_cmd->add_option("--k-list", bench_o.ks, "k values (default 10)")->delimiter(',');
    bench_cmd->add_option("--algos", bench_o.algos, "algorithms to run")->delimiter(',');
    bench_cmd->add_option("--strategy", bench_o.strategy, "unbalanced (default) or balanced");
    bench_cmd->add_flag("--permute", bench_o.permute, "depth-first reorder before searching");
    bench_cmd->add_option("--augment-mults", bench_o.augment_mults,
                          "cardinality multipliers to sweep (default 1)")
        ->delimiter(',');
    bench_cmd->add_option("--augment-epsilon", bench_o.augment_epsilon,
                          "augmentation noise radius (default 0.01)");
    bench_cmd->add_flag("--count-distances", bench_o.count_distances,
                        "report distance computations (always collected)");
    bench_cmd->add_option("--out", bench_o.out, "benchmark CSV")->required();
    bench_cmd->add_option("--lfd-out", bench_o.lfd_out, "per-depth LFD percentile CSV");
    bench_cmd->add_option("--workers", bench_o.workers, "concurrent query workers (default 1)");
    bench_cmd->callback([&] { action = [&] { run_bench(g, bench_o); }; });

    LfdOpts lfd_o;
    auto* lfd_cmd = app.add_subcommand("lfd-report", "per-depth LFD percentiles of a tree");
    lfd_cmd->fallthrough();
    lfd_cmd->add_option("--tree", lfd_o.tree, "tree file")->required();
    lfd_cmd->add_option("--out", lfd_o.out, "output CSV")->required();
    lfd_cmd->callback([&] { action = [&] { run_lfd_report(lfd_o); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        action();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::logic_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
