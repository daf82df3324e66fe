#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relforge/docforge.hpp"
#include "relforge/inference.hpp"
#include "relforge/metrics.hpp"
#include "relforge/mlp.hpp"
#include "relforge/scorer.hpp"

namespace relforge {

struct GridSpec {
    std::vector<size_t> n_inc_choices{0, 8, 16};
    std::vector<size_t> n_rel_choices{0, 8, 16};
    std::vector<size_t> n_nest_choices{0, 4, 8};
    std::vector<size_t> d_choices{0, 1};
};

enum class RunMode { MetricAware, MlpHead };

struct ConfigResult {
    DocParams params;
    double validation_metric = 0.0;
    double test_metric = 0.0;
    double token_mean = 0.0;
    double token_std = 0.0;
    size_t documents = 0;
    size_t hard_failures = 0;
    size_t halvings = 0;  // context-length fallbacks applied
    bool valid = true;
};

struct RunReport {
    std::string task;
    RunMode mode = RunMode::MetricAware;
    Metric metric = Metric::Auroc;
    std::vector<uint64_t> seeds;
    std::vector<ConfigResult> configs;
    bool any_valid = false;
    DocParams selected;
    double selected_validation_metric = 0.0;
    double selected_test_metric = 0.0;
};

struct RunOptions {
    RunMode mode = RunMode::MetricAware;
    std::vector<uint64_t> seeds{0};
    size_t test_cap = 10000;
    size_t val_cap = 10000;
    size_t n_train = 100000;      // MLP training subset size
    size_t max_candidates = 128;  // regression candidate grid
    size_t hidden = 10;
    TrainConfig train_cfg;
    ExecMode exec = ExecMode::Parallel;
    double invalid_failure_fraction = 0.01;
};

// Outcome of building + scoring one task row, after any context-length
// halvings were applied to that document alone.
struct RowScore {
    double value = 0.0;          // classification score or regression prediction
    bool ok = false;
    size_t halvings = 0;
    size_t token_estimate = 0;
    std::string error;
};

// Build, score and, on context-length errors, halve-and-retry a single row.
// `candidates` is required for regression tasks.
RowScore score_task_row(const TaskRow& row, size_t row_id, const TaskSpec& spec,
                        const TaskSplit& split, const IndexedStore& store, DocParams params,
                        const std::vector<TaskRow>& shared_inc, const Scorer& scorer,
                        const CandidateGrid* candidates);

// Same retry loop around embed_last_token, for the MLP path.
struct RowEmbedding {
    Embedding embedding;
    bool ok = false;
    size_t halvings = 0;
    size_t token_estimate = 0;
    std::string error;
};
RowEmbedding embed_task_row(const TaskRow& row, size_t row_id, const TaskSpec& spec,
                            const TaskSplit& split, const IndexedStore& store, DocParams params,
                            const std::vector<TaskRow>& shared_inc, const Scorer& scorer);

// Sweeps every grid point: builds validation and test documents (one shared
// in-context set per task/seed pair, drawn before the earliest document seed
// time), scores them (metric-aware) or embeds + trains a head (mlp), computes
// metrics and token statistics, then selects the best configuration by
// validation metric (ties to the lexicographically smaller parameters). Grid
// points exceeding the hard-failure budget are excluded from selection.
RunReport run_grid(const TaskSpec& spec, const TaskSplit& split, const IndexedStore& store,
                   const GridSpec& grid, const Scorer& scorer, const RunOptions& options);

std::string report_to_json(const RunReport& report);
std::string format_token_stats(double mean, double std_dev);

}  // namespace relforge
