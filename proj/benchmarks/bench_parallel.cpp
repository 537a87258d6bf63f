// Compares the serial reference paths against the OpenMP kernels: tree
// build, batched k-NN search, the linear-scan oracle, and augmentation.
// Usage: bench_parallel [n] [d] [d_int] [queries]

#include "cakes/augment.hpp"
#include "cakes/gen.hpp"
#include "cakes/search.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace cakes;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double timed(F&& f) {
    const auto t0 = Clock::now();
    f();
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void row(const char* kernel, double serial_s, double parallel_s, const char* unit, double work) {
    std::printf("%-22s %10.3f %10.3f %8.2fx   %10.0f %s\n", kernel, serial_s, parallel_s,
                serial_s / parallel_s, work / parallel_s, unit);
}

} // namespace

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 200000;
    const std::size_t d = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 32;
    const std::size_t d_int = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 4;
    const std::size_t n_queries = argc > 4 ? std::strtoull(argv[4], nullptr, 10) : 200;

    int threads = 1;
#ifdef _OPENMP
    threads = omp_get_max_threads();
#endif
    std::printf("n=%zu d=%zu d_int=%zu queries=%zu threads=%d\n", n, d, d_int, n_queries,
                threads);
    std::printf("%-22s %10s %10s %9s   %s\n", "kernel", "serial s", "omp s", "speedup",
                "omp throughput");

    const Dataset all = gen_manifold(n + n_queries, d, d_int, 1);
    const std::size_t dim = all.dimensionality();
    std::vector<float> pts(all.vector_data().begin(), all.vector_data().begin() + n * dim);
    std::vector<float> qs(all.vector_data().begin() + n * dim, all.vector_data().end());
    const Dataset data = Dataset::from_vectors("bench", std::move(pts), dim);
    const Dataset queries = Dataset::from_vectors("bench-queries", std::move(qs), dim);
    const Metric euclid = Metric::by_name("euclidean");

    // Tree build: the task-parallel kernel vs a single-thread run of the
    // same code. Both produce identical trees (see tests/test_parallel.cpp).
    {
#ifdef _OPENMP
        omp_set_num_threads(1);
#endif
        const double serial = timed([&] { build(data, euclid, {}, Strategy::unbalanced, 2); });
#ifdef _OPENMP
        omp_set_num_threads(threads);
#endif
        const double parallel = timed([&] { build(data, euclid, {}, Strategy::unbalanced, 2); });
        row("tree build", serial, parallel, "points/s", static_cast<double>(n));
    }

    const Tree tree = build(data, euclid, {}, Strategy::unbalanced, 2);
    const Searcher searcher(tree);

    for (const KnnAlgo algo : cakes_algos()) {
        const double serial = timed([&] { knn_batch(searcher, queries, 10, algo, 1); });
        const double parallel = timed([&] { knn_batch(searcher, queries, 10, algo, threads); });
        row((std::string("knn ") + algo_name(algo)).c_str(), serial, parallel, "q/s",
            static_cast<double>(n_queries));
    }

    {
        const double serial = timed([&] { linear_knn_batch(data, euclid, queries, 10, 1); });
        const double parallel =
            timed([&] { linear_knn_batch(data, euclid, queries, 10, threads); });
        row("linear oracle", serial, parallel, "q/s", static_cast<double>(n_queries));
    }

    {
        const std::vector<double> rho = {0.01};
        const double serial = timed([&] { rnn_batch(searcher, queries, rho, 1); });
        const double parallel = timed([&] { rnn_batch(searcher, queries, rho, threads); });
        row("rho-nn", serial, parallel, "q/s", static_cast<double>(n_queries));
    }

    {
#ifdef _OPENMP
        omp_set_num_threads(1);
#endif
        const double serial = timed([&] { augment(data, {2, 0.01, 3}); });
#ifdef _OPENMP
        omp_set_num_threads(threads);
#endif
        const double parallel = timed([&] { augment(data, {2, 0.01, 3}); });
        row("augment x2", serial, parallel, "points/s", static_cast<double>(n));
    }
    return 0;
}
