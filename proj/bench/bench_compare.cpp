// Serial vs OpenMP throughput for the batch kernels: document construction
// over task rows and AUROC over large score vectors (rank-based vs the
// quadratic pair count).
//
// Usage: relforge_bench [n_docs] [n_scores]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "relforge/docforge.hpp"
#include "relforge/metrics.hpp"
#include "relforge/rng.hpp"
#include "support/synthetic.hpp"

using namespace relforge;
using namespace relforge::testing;

namespace {

double time_seconds(const std::function<void()>& fn) {
    auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double auroc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0, pairs = 0.0;
    for (size_t p = 0; p < scores.size(); ++p) {
        if (labels[p] != 1) continue;
        for (size_t n = 0; n < scores.size(); ++n) {
            if (labels[n] != 0) continue;
            pairs += 1.0;
            wins += scores[p] > scores[n] ? 1.0 : (scores[p] == scores[n] ? 0.5 : 0.0);
        }
    }
    return wins / pairs;
}

}  // namespace

int main(int argc, char** argv) {
    size_t n_docs = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 2000;
    size_t n_scores = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 20000;

#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: disabled\n");
#endif

    // ---------------------------------------------------- document building
    SyntheticConfig cfg;
    cfg.seed = 1234;
    cfg.n_users = 300;
    cfg.n_orders = 3000;
    cfg.n_items = 5000;
    cfg.train_rows = 500;
    cfg.test_rows = 200;
    auto syn = make_synthetic(cfg);

    std::vector<TaskRow> rows;
    rows.reserve(n_docs);
    for (size_t i = 0; i < n_docs; ++i)
        rows.push_back(syn.segment_split.test[i % syn.segment_split.test.size()]);

    DocParams params{8, 8, 4, 1, 7};
    Timestamp before = rows[0].seed_time;
    for (const TaskRow& r : rows) before = std::min(before, r.seed_time);
    auto shared = stratified_sample(syn.segment_split.train, params.n_inc, before, params.seed);

    std::vector<Document> serial_docs, parallel_docs;
    double t_serial = time_seconds([&] {
        serial_docs = build_documents(rows, syn.segment_spec, syn.segment_split, syn.store,
                                      params, shared, ExecMode::Serial);
    });
    double t_parallel = time_seconds([&] {
        parallel_docs = build_documents(rows, syn.segment_spec, syn.segment_split, syn.store,
                                        params, shared, ExecMode::Parallel);
    });
    bool identical = serial_docs.size() == parallel_docs.size();
    for (size_t i = 0; identical && i < serial_docs.size(); ++i)
        identical = serial_docs[i].text == parallel_docs[i].text;

    std::printf("build_documents  n=%zu  serial %.3fs (%.0f docs/s)  openmp %.3fs (%.0f docs/s)"
                "  speedup %.2fx  identical=%s\n",
                n_docs, t_serial, n_docs / t_serial, t_parallel, n_docs / t_parallel,
                t_serial / t_parallel, identical ? "yes" : "NO");

    // ----------------------------------------------------------------- auroc
    Rng rng(99);
    std::vector<double> scores(n_scores);
    std::vector<int> labels(n_scores);
    for (size_t i = 0; i < n_scores; ++i) {
        scores[i] = rng.unit();
        labels[i] = static_cast<int>(rng.below(2));
    }
    labels[0] = 0;
    labels[1] = 1;

    double fast = 0.0, slow = 0.0;
    double t_rank = time_seconds([&] { fast = auroc(scores, labels); });
    double t_pairs = time_seconds([&] { slow = auroc_pairs(scores, labels); });
    std::printf("auroc            n=%zu  rank %.4fs  pair-count %.3fs  speedup %.0fx  |diff| %.2e\n",
                n_scores, t_rank, t_pairs, t_pairs / t_rank, std::abs(fast - slow));
    return 0;
}
