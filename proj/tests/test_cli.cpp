#include "cakes/dataset.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = CAKES_CLI_PATH;
const fs::path kSource = CAKES_SOURCE_DIR;

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "cakes_cli_tests";
    fs::create_directories(dir);
    return dir;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run(const std::string& args) {
    const fs::path dir = work_dir();
    const fs::path out_p = dir / "stdout.txt";
    const fs::path err_p = dir / "stderr.txt";
    const std::string cmd =
        kCli.string() + " " + args + " > " + out_p.string() + " 2> " + err_p.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream out_f(out_p), err_f(err_p);
    r.out.assign(std::istreambuf_iterator<char>(out_f), std::istreambuf_iterator<char>());
    r.err.assign(std::istreambuf_iterator<char>(err_f), std::istreambuf_iterator<char>());
    return r;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<nlohmann::json> read_jsonl(const fs::path& p) {
    std::ifstream in(p);
    std::vector<nlohmann::json> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
    }
    return lines;
}

} // namespace

TEST_CASE("build on the bundled 5-point csv") {
    const fs::path dir = work_dir();
    const fs::path csv = kSource / "data" / "five_points.csv";
    REQUIRE(fs::exists(csv));
    const auto r = run("build --data " + csv.string() + " --format csv --distance euclidean --out " +
                       (dir / "five.tree").string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("metric entropy: 5 leaves") != std::string::npos);
    CHECK(r.out.find("max depth:") != std::string::npos);
}

TEST_CASE("balanced build on 2^m points reports max depth m") {
    const fs::path dir = work_dir();
    {
        std::ofstream csv(dir / "pow2.csv");
        for (int i = 0; i < 8; ++i) csv << i << "\n";
    }
    const auto r = run("build --data " + (dir / "pow2.csv").string() +
                       " --format csv --distance euclidean --strategy balanced --out " +
                       (dir / "pow2.tree").string());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("max depth: 3") != std::string::npos);
}

TEST_CASE("missing file exits 2 with a one-line diagnostic") {
    const auto r = run("build --data /nonexistent.bin --distance euclidean --out /tmp/x.tree");
    CHECK(r.exit_code == 2);
    CHECK_FALSE(r.err.empty());
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("unknown distance exits 2") {
    const fs::path csv = kSource / "data" / "five_points.csv";
    const auto r = run("build --data " + csv.string() +
                       " --format csv --distance manhattan --out /tmp/x.tree");
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("manhattan") != std::string::npos);
}

TEST_CASE("search pipeline end to end") {
    const fs::path dir = work_dir();
    const std::string data = (dir / "d.bin").string();
    const std::string queries = (dir / "q.bin").string();
    const std::string tree = (dir / "d.tree").string();

    REQUIRE(run("gen --kind uniform-hypercube --n 1200 --d 6 --seed 5 --out " + data).exit_code ==
            0);
    REQUIRE(run("gen --kind uniform-hypercube --n 12 --d 6 --seed 6 --out " + queries).exit_code ==
            0);
    REQUIRE(run("build --data " + data + " --distance euclidean --permute --seed 7 --out " + tree)
                .exit_code == 0);

    SUBCASE("linear and depth-sieve agree") {
        const std::string a = (dir / "a.jsonl").string();
        const std::string b = (dir / "b.jsonl").string();
        REQUIRE(run("search --tree " + tree + " --data " + data + " --queries " + queries +
                    " --algo depth-sieve --k 4 --out " + a)
                    .exit_code == 0);
        REQUIRE(run("search --tree " + tree + " --data " + data + " --queries " + queries +
                    " --algo linear --k 4 --out " + b)
                    .exit_code == 0);
        const auto lines_a = read_jsonl(a);
        const auto lines_b = read_jsonl(b);
        REQUIRE(lines_a.size() == 12);
        for (std::size_t i = 0; i < lines_a.size(); ++i) {
            CHECK(lines_a[i]["neighbors"] == lines_b[i]["neighbors"]);
            CHECK(lines_a[i]["k"] == 4);
        }
    }
    SUBCASE("radius zero on dataset queries returns each query itself") {
        const std::string out = (dir / "self.jsonl").string();
        REQUIRE(run("search --tree " + tree + " --data " + data + " --queries " + data +
                    " --radius 0 --out " + out)
                    .exit_code == 0);
        const auto lines = read_jsonl(out);
        REQUIRE(lines.size() == 1200);
        for (const auto& line : lines) {
            REQUIRE(line["neighbors"].size() == 1);
            CHECK(line["neighbors"][0][0].get<std::uint64_t>() ==
                  line["query"].get<std::uint64_t>());
            CHECK(line["neighbors"][0][1].get<double>() == 0.0);
        }
    }
    SUBCASE("auto mode reports a choice from the allowed set") {
        const auto r = run("search --tree " + tree + " --data " + data + " --queries " + queries +
                           " --algo auto --k 4 --out " + (dir / "auto.jsonl").string());
        CHECK(r.exit_code == 0);
        CHECK(r.err.find("auto-tune chose: ") != std::string::npos);
        const bool known = r.err.find("repeated-rnn") != std::string::npos ||
                           r.err.find("breadth-sieve") != std::string::npos ||
                           r.err.find("depth-sieve") != std::string::npos;
        CHECK(known);
    }
    SUBCASE("identical invocations produce identical results, timings aside") {
        const std::string a = (dir / "det_a.jsonl").string();
        const std::string b = (dir / "det_b.jsonl").string();
        for (const std::string& out : {a, b}) {
            REQUIRE(run("search --tree " + tree + " --data " + data + " --queries " + queries +
                        " --algo breadth-sieve --k 6 --out " + out)
                        .exit_code == 0);
        }
        auto lines_a = read_jsonl(a);
        auto lines_b = read_jsonl(b);
        REQUIRE(lines_a.size() == lines_b.size());
        for (std::size_t i = 0; i < lines_a.size(); ++i) {
            lines_a[i].erase("elapsed_us");
            lines_b[i].erase("elapsed_us");
            CHECK(lines_a[i] == lines_b[i]);
        }
    }
    SUBCASE("k beyond the cardinality exits 2") {
        const auto r = run("search --tree " + tree + " --data " + data + " --queries " + queries +
                           " --algo linear --k 5000 --out " + (dir / "x.jsonl").string());
        CHECK(r.exit_code == 2);
    }
    SUBCASE("ground truth has recall 1 against itself") {
        const std::string gt = (dir / "gt.jsonl").string();
        REQUIRE(run("ground-truth --data " + data + " --queries " + queries +
                    " --distance euclidean --k 5 --out " + gt)
                    .exit_code == 0);
        const cakes::GroundTruth loaded = cakes::load_ground_truth(gt);
        REQUIRE(loaded.per_query.size() == 12);
        for (const auto& neighbors : loaded.per_query) {
            CHECK(cakes::recall(neighbors, neighbors, 5) == 1.0);
        }
    }
    SUBCASE("bench emits fixed CSV columns and an LFD table") {
        const std::string csv = (dir / "bench.csv").string();
        const std::string lfd = (dir / "lfd.csv").string();
        const auto r = run("bench --data " + data + " --queries " + queries +
                           " --distance euclidean --k-list 1,4 --algos depth-sieve,linear" +
                           " --out " + csv + " --lfd-out " + lfd);
        REQUIRE(r.exit_code == 0);
        std::ifstream in(csv);
        std::string header;
        std::getline(in, header);
        CHECK(header ==
              "dataset,distance,strategy,permuted,algo,k,cardinality,qps,recall,"
              "mean_distance_count");
        std::size_t rows = 0;
        std::string line;
        while (std::getline(in, line)) rows += !line.empty();
        CHECK(rows == 4); // 2 k values x 2 algorithms
        CHECK(fs::exists(lfd));
    }
    SUBCASE("an augment sweep multiplies the row count") {
        const std::string csv = (dir / "sweep.csv").string();
        const auto r = run("bench --data " + data + " --queries " + queries +
                           " --distance euclidean --k-list 2 --algos depth-sieve" +
                           " --augment-mults 1,2,4 --augment-epsilon 0.01 --out " + csv);
        REQUIRE(r.exit_code == 0);
        std::ifstream in(csv);
        std::string line;
        std::getline(in, line); // header
        std::size_t rows = 0;
        while (std::getline(in, line)) rows += !line.empty();
        CHECK(rows == 3);
    }
    SUBCASE("lfd-report works from the tree file alone") {
        const std::string out = (dir / "treelfd.csv").string();
        REQUIRE(run("lfd-report --tree " + tree + " --out " + out).exit_code == 0);
        std::ifstream in(out);
        std::string header;
        std::getline(in, header);
        CHECK(header == "depth,min,p5,p25,p50,p75,p95,max,points");
    }
}

TEST_CASE("gen is deterministic at the byte level") {
    const fs::path dir = work_dir();
    const std::string a = (dir / "gen_a.bin").string();
    const std::string b = (dir / "gen_b.bin").string();
    REQUIRE(run("gen --kind manifold --n 500 --d 16 --d-int 3 --seed 11 --out " + a).exit_code ==
            0);
    REQUIRE(run("gen --kind manifold --n 500 --d 16 --d-int 3 --seed 11 --out " + b).exit_code ==
            0);
    CHECK(file_bytes(a) == file_bytes(b));

    const auto bad = run("gen --kind manifold --n 10 --d 4 --d-int 8 --seed 1 --out " +
                         (dir / "bad.bin").string());
    CHECK(bad.exit_code == 2);
}

TEST_CASE("augment sweep via the CLI") {
    const fs::path dir = work_dir();
    const std::string data = (dir / "base.bin").string();
    REQUIRE(run("gen --kind uniform-hypercube --n 100 --d 4 --seed 3 --out " + data).exit_code ==
            0);
    const std::string out = (dir / "aug.bin").string();
    const auto r = run("augment --data " + data + " --multiplier 3 --epsilon 0.01 --out " + out);
    REQUIRE(r.exit_code == 0);
    const cakes::Dataset aug = cakes::Dataset::load(out, cakes::FileFormat::raw_f32);
    CHECK(aug.cardinality() == 300);
    CHECK(fs::exists(out + ".sources.json"));
}
