#include "relforge/grid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

#include "relforge/inference.hpp"
#include "relforge/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace relforge {

namespace {

constexpr uint64_t kValSalt = 0x76616c;
constexpr uint64_t kTestSalt = 0x74657374;
constexpr uint64_t kIncSalt = 0x696e63;
constexpr uint64_t kTrainSalt = 0x747261696e;

std::vector<TaskRow> draw_shared_inc(const TaskSpec& spec, const TaskSplit& split, size_t n_inc,
                                     Timestamp before, uint64_t seed) {
    if (spec.task_type == TaskType::BinaryClassification)
        return stratified_sample(split.train, n_inc, before, seed);
    return uniform_sample(split.train, n_inc, before, seed);
}

std::optional<Timestamp> min_seed_time(const std::vector<const std::vector<TaskRow>*>& groups) {
    std::optional<Timestamp> m;
    for (const auto* rows : groups)
        for (const TaskRow& r : *rows)
            if (!m || r.seed_time < *m) m = r.seed_time;
    return m;
}

int scoring_threads(const Scorer& scorer) {
#ifdef _OPENMP
    int hw = omp_get_max_threads();
    return std::max(1, std::min(hw, static_cast<int>(scorer.config().max_in_flight)));
#else
    (void)scorer;
    return 1;
#endif
}

// Per-config working state for one seed.
struct ConfigRun {
    std::vector<double> val_scores, val_labels_or_targets;
    std::vector<double> test_scores, test_labels_or_targets;
    std::vector<size_t> token_estimates;
    size_t documents = 0;
    size_t hard_failures = 0;
    size_t halvings = 0;
};

}  // namespace

RowScore score_task_row(const TaskRow& row, size_t row_id, const TaskSpec& spec,
                        const TaskSplit& split, const IndexedStore& store, DocParams params,
                        const std::vector<TaskRow>& shared_inc, const Scorer& scorer,
                        const CandidateGrid* candidates) {
    RowScore out;
    for (;;) {
        Document doc;
        try {
            doc = build_document(row, row_id, spec, split, store, params, shared_inc);
        } catch (const Error& e) {
            out.error = e.what();
            return out;
        }
        out.token_estimate = doc.token_estimate;
        try {
            if (spec.task_type == TaskType::BinaryClassification) {
                out.value = classification_score(scorer.next_token_distribution(doc.text));
            } else {
                if (!candidates)
                    throw ValidationError("regression scoring requires a candidate grid");
                out.value = median_predict(doc.text, *candidates, scorer);
            }
            out.ok = true;
            return out;
        } catch (const ContextLengthError& e) {
            if (params.n_inc == 0 && params.n_rel == 0) {
                out.error = std::string("context length exhausted after halving: ") + e.what();
                return out;
            }
            params = shrink_on_oversize(params);
            ++out.halvings;
        } catch (const Error& e) {
            out.error = e.what();
            return out;
        } catch (const std::exception& e) {
            out.error = e.what();
            return out;
        }
    }
}

RowEmbedding embed_task_row(const TaskRow& row, size_t row_id, const TaskSpec& spec,
                            const TaskSplit& split, const IndexedStore& store, DocParams params,
                            const std::vector<TaskRow>& shared_inc, const Scorer& scorer) {
    RowEmbedding out;
    for (;;) {
        Document doc;
        try {
            doc = build_document(row, row_id, spec, split, store, params, shared_inc);
        } catch (const Error& e) {
            out.error = e.what();
            return out;
        }
        out.token_estimate = doc.token_estimate;
        try {
            out.embedding = scorer.embed_last_token(doc.text);
            out.ok = true;
            return out;
        } catch (const ContextLengthError& e) {
            if (params.n_inc == 0 && params.n_rel == 0) {
                out.error = std::string("context length exhausted after halving: ") + e.what();
                return out;
            }
            params = shrink_on_oversize(params);
            ++out.halvings;
        } catch (const Error& e) {
            out.error = e.what();
            return out;
        } catch (const std::exception& e) {
            out.error = e.what();
            return out;
        }
    }
}

namespace {

// Scores a row batch (parallel when requested), appending per-row outcomes.
std::vector<RowScore> score_batch(const std::vector<TaskRow>& rows, const TaskSpec& spec,
                                  const TaskSplit& split, const IndexedStore& store,
                                  const DocParams& params, const std::vector<TaskRow>& shared_inc,
                                  const Scorer& scorer, const CandidateGrid* candidates,
                                  ExecMode exec) {
    std::vector<RowScore> out(rows.size());
    if (exec == ExecMode::Serial) {
        for (size_t i = 0; i < rows.size(); ++i)
            out[i] = score_task_row(rows[i], i, spec, split, store, params, shared_inc, scorer,
                                    candidates);
        return out;
    }
    const int threads = scoring_threads(scorer);
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
    for (size_t i = 0; i < rows.size(); ++i)
        out[i] = score_task_row(rows[i], i, spec, split, store, params, shared_inc, scorer,
                                candidates);
    return out;
}

std::vector<RowEmbedding> embed_batch(const std::vector<TaskRow>& rows, const TaskSpec& spec,
                                      const TaskSplit& split, const IndexedStore& store,
                                      const DocParams& params,
                                      const std::vector<TaskRow>& shared_inc, const Scorer& scorer,
                                      ExecMode exec) {
    std::vector<RowEmbedding> out(rows.size());
    if (exec == ExecMode::Serial) {
        for (size_t i = 0; i < rows.size(); ++i)
            out[i] = embed_task_row(rows[i], i, spec, split, store, params, shared_inc, scorer);
        return out;
    }
    const int threads = scoring_threads(scorer);
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
    for (size_t i = 0; i < rows.size(); ++i)
        out[i] = embed_task_row(rows[i], i, spec, split, store, params, shared_inc, scorer);
    return out;
}

double metric_of(Metric metric, const std::vector<double>& scores,
                 const std::vector<double>& labels_or_targets) {
    if (scores.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (metric == Metric::Auroc) {
        std::vector<int> labels(labels_or_targets.size());
        bool has_pos = false, has_neg = false;
        for (size_t i = 0; i < labels_or_targets.size(); ++i) {
            labels[i] = labels_or_targets[i] >= 0.5 ? 1 : 0;
            (labels[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) return std::numeric_limits<double>::quiet_NaN();
        return auroc(scores, labels);
    }
    return mae(scores, labels_or_targets);
}

void run_metric_aware(ConfigRun& run, const TaskSpec& spec, const TaskSplit& split,
                      const IndexedStore& store, const DocParams& params,
                      const std::vector<TaskRow>& shared_inc, const std::vector<TaskRow>& val_rows,
                      const std::vector<TaskRow>& test_rows, const Scorer& scorer,
                      const CandidateGrid* candidates, ExecMode exec) {
    auto collect = [&](const std::vector<TaskRow>& rows, std::vector<double>& scores,
                       std::vector<double>& truths, bool is_test) {
        auto results = score_batch(rows, spec, split, store, params, shared_inc, scorer,
                                   candidates, exec);
        for (size_t i = 0; i < results.size(); ++i) {
            run.documents += 1;
            run.halvings += results[i].halvings;
            if (!results[i].ok) {
                run.hard_failures += 1;
                continue;
            }
            if (is_test) run.token_estimates.push_back(results[i].token_estimate);
            if (!rows[i].target) continue;  // unlabeled row: scored but not evaluated
            scores.push_back(results[i].value);
            truths.push_back(rows[i].target->numeric());
        }
    };
    collect(val_rows, run.val_scores, run.val_labels_or_targets, false);
    collect(test_rows, run.test_scores, run.test_labels_or_targets, true);
}

void run_mlp_head(ConfigRun& run, const TaskSpec& spec, const TaskSplit& split,
                  const IndexedStore& store, const DocParams& params, uint64_t seed,
                  const std::vector<TaskRow>& val_rows, const std::vector<TaskRow>& test_rows,
                  const Scorer& scorer, const RunOptions& options) {
    // Training subset gets its own shared in-context set, drawn before the
    // earliest training document seed time.
    std::vector<TaskRow> train_rows =
        sample_test(split.train, std::min(options.n_train, options.train_cfg.max_train),
                    mix64(seed, kTrainSalt));
    auto before_train = min_seed_time({&train_rows});
    std::vector<TaskRow> train_inc;
    if (before_train)
        train_inc = draw_shared_inc(spec, split, params.n_inc, *before_train,
                                    mix64(params.seed, kIncSalt));

    auto before_eval = min_seed_time({&val_rows, &test_rows});
    std::vector<TaskRow> eval_inc;
    if (before_eval)
        eval_inc = draw_shared_inc(spec, split, params.n_inc, *before_eval,
                                   mix64(params.seed, kIncSalt));

    auto gather = [&](const std::vector<TaskRow>& rows, const std::vector<TaskRow>& inc,
                      bool is_test) {
        auto embs = embed_batch(rows, spec, split, store, params, inc, scorer, options.exec);
        HeadDataset ds;
        for (size_t i = 0; i < embs.size(); ++i) {
            run.documents += 1;
            run.halvings += embs[i].halvings;
            if (!embs[i].ok) {
                run.hard_failures += 1;
                continue;
            }
            if (is_test) run.token_estimates.push_back(embs[i].token_estimate);
            if (!rows[i].target) continue;
            ds.inputs.push_back(std::move(embs[i].embedding));
            ds.targets.push_back(rows[i].target->numeric());
        }
        return ds;
    };

    HeadDataset train_ds = gather(train_rows, train_inc, false);
    HeadDataset val_ds = gather(val_rows, eval_inc, false);
    HeadDataset test_ds = gather(test_rows, eval_inc, true);
    if (train_ds.size() == 0 || test_ds.size() == 0) return;  // metrics stay NaN

    OutputMode mode = spec.task_type == TaskType::BinaryClassification ? OutputMode::Logit
                                                                       : OutputMode::Linear;
    TrainConfig cfg = options.train_cfg;
    cfg.seed = mix64(seed, mix64(params.n_inc * 131 + params.n_rel * 17 + params.n_nest * 7 +
                                 params.d));
    MlpHead head = init_head(train_ds.inputs[0].dim, options.hidden, mode, cfg.seed);
    TrainResult trained = train(std::move(head), train_ds, val_ds, cfg);

    auto evaluate = [&](const HeadDataset& ds, std::vector<double>& scores,
                        std::vector<double>& truths) {
        for (size_t i = 0; i < ds.size(); ++i) {
            scores.push_back(predict(trained.head, ds.inputs[i]));
            truths.push_back(ds.targets[i]);
        }
    };
    evaluate(val_ds, run.val_scores, run.val_labels_or_targets);
    evaluate(test_ds, run.test_scores, run.test_labels_or_targets);
}

}  // namespace

RunReport run_grid(const TaskSpec& spec, const TaskSplit& split, const IndexedStore& store,
                   const GridSpec& grid, const Scorer& scorer, const RunOptions& options) {
    RunReport report;
    report.task = spec.name;
    report.mode = options.mode;
    report.metric = spec.metric;
    report.seeds = options.seeds.empty() ? std::vector<uint64_t>{0} : options.seeds;

    CandidateGrid candidates;
    const CandidateGrid* candidates_ptr = nullptr;
    if (spec.task_type == TaskType::Regression) {
        std::vector<double> train_targets;
        for (const TaskRow& r : split.train)
            if (r.target) train_targets.push_back(r.target->numeric());
        candidates = build_grid(train_targets, options.max_candidates);
        candidates_ptr = &candidates;
    }

    for (size_t n_inc : grid.n_inc_choices)
        for (size_t n_rel : grid.n_rel_choices)
            for (size_t n_nest : grid.n_nest_choices)
                for (size_t d : grid.d_choices) {
                    ConfigResult result;
                    double val_sum = 0.0, test_sum = 0.0;
                    size_t metric_runs = 0;
                    std::vector<size_t> all_tokens;

                    for (uint64_t seed : report.seeds) {
                        DocParams params{n_inc, n_rel, n_nest, d, seed};
                        result.params = params;

                        std::vector<TaskRow> val_rows =
                            sample_test(split.validation, options.val_cap, mix64(seed, kValSalt));
                        std::vector<TaskRow> test_rows =
                            sample_test(split.test, options.test_cap, mix64(seed, kTestSalt));

                        ConfigRun run;
                        double val_metric = std::numeric_limits<double>::quiet_NaN();
                        double test_metric = std::numeric_limits<double>::quiet_NaN();
                        try {
                            if (options.mode == RunMode::MetricAware) {
                                auto before = min_seed_time({&val_rows, &test_rows});
                                std::vector<TaskRow> shared_inc;
                                if (before)
                                    shared_inc = draw_shared_inc(spec, split, n_inc, *before,
                                                                 mix64(seed, kIncSalt));
                                run_metric_aware(run, spec, split, store, params, shared_inc,
                                                 val_rows, test_rows, scorer, candidates_ptr,
                                                 options.exec);
                            } else {
                                run_mlp_head(run, spec, split, store, params, seed, val_rows,
                                             test_rows, scorer, options);
                            }
                            val_metric =
                                metric_of(spec.metric, run.val_scores, run.val_labels_or_targets);
                            test_metric = metric_of(spec.metric, run.test_scores,
                                                    run.test_labels_or_targets);
                        } catch (const Error&) {
                            // a failed run (training blew up, scorer misconfigured)
                            // invalidates this grid point, not the sweep
                        }
                        if (std::isfinite(val_metric) && std::isfinite(test_metric)) {
                            val_sum += val_metric;
                            test_sum += test_metric;
                            ++metric_runs;
                        }
                        result.documents += run.documents;
                        result.hard_failures += run.hard_failures;
                        result.halvings += run.halvings;
                        all_tokens.insert(all_tokens.end(), run.token_estimates.begin(),
                                          run.token_estimates.end());
                    }

                    if (metric_runs > 0) {
                        result.validation_metric = val_sum / static_cast<double>(metric_runs);
                        result.test_metric = test_sum / static_cast<double>(metric_runs);
                    } else {
                        result.validation_metric = std::numeric_limits<double>::quiet_NaN();
                        result.test_metric = std::numeric_limits<double>::quiet_NaN();
                    }
                    if (!all_tokens.empty()) {
                        double mean = 0.0;
                        for (size_t t : all_tokens) mean += static_cast<double>(t);
                        mean /= static_cast<double>(all_tokens.size());
                        double var = 0.0;
                        for (size_t t : all_tokens) {
                            double diff = static_cast<double>(t) - mean;
                            var += diff * diff;
                        }
                        result.token_mean = mean;
                        result.token_std = std::sqrt(var / static_cast<double>(all_tokens.size()));
                    }
                    // a grid point with more than the allowed share of hard
                    // failures is excluded from selection
                    result.valid =
                        result.documents == 0 ||
                        static_cast<double>(result.hard_failures) <=
                            options.invalid_failure_fraction * static_cast<double>(result.documents);
                    if (!std::isfinite(result.validation_metric)) result.valid = false;
                    report.configs.push_back(std::move(result));
                }

    // Best by validation, ties to the lexicographically smaller parameters
    // (grid loops already emit configs in lexicographic order).
    const bool higher_better = spec.metric == Metric::Auroc;
    for (const ConfigResult& c : report.configs) {
        if (!c.valid) continue;
        bool better = !report.any_valid ||
                      (higher_better ? c.validation_metric > report.selected_validation_metric
                                     : c.validation_metric < report.selected_validation_metric);
        if (better) {
            report.any_valid = true;
            report.selected = c.params;
            report.selected_validation_metric = c.validation_metric;
            report.selected_test_metric = c.test_metric;
        }
    }
    return report;
}

std::string format_token_stats(double mean, double std_dev) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f ± %.1f", mean, std_dev);
    return buf;
}

std::string report_to_json(const RunReport& report) {
    nlohmann::ordered_json doc;
    doc["task"] = report.task;
    doc["mode"] = report.mode == RunMode::MetricAware ? "metric-aware" : "mlp-head";
    doc["metric"] = report.metric == Metric::Auroc ? "auroc" : "mae";
    doc["seeds"] = report.seeds;
    auto params_json = [](const DocParams& p) {
        return nlohmann::ordered_json{
            {"n_inc", p.n_inc}, {"n_rel", p.n_rel}, {"n_nest", p.n_nest}, {"d", p.d}};
    };
    doc["configs"] = nlohmann::ordered_json::array();
    for (const ConfigResult& c : report.configs) {
        nlohmann::ordered_json jc;
        jc["params"] = params_json(c.params);
        if (std::isfinite(c.validation_metric)) {
            jc["validation_metric"] = c.validation_metric;
            jc["test_metric"] = c.test_metric;
        } else {
            jc["validation_metric"] = nullptr;
            jc["test_metric"] = nullptr;
        }
        jc["token_mean"] = c.token_mean;
        jc["token_std"] = c.token_std;
        jc["tokens"] = format_token_stats(c.token_mean, c.token_std);
        jc["documents"] = c.documents;
        jc["hard_failures"] = c.hard_failures;
        jc["halvings"] = c.halvings;
        jc["valid"] = c.valid;
        doc["configs"].push_back(std::move(jc));
    }
    if (report.any_valid) {
        doc["selected"] = params_json(report.selected);
        doc["selected_validation_metric"] = report.selected_validation_metric;
        doc["selected_test_metric"] = report.selected_test_metric;
    } else {
        doc["selected"] = nullptr;
    }
    return doc.dump(2);
}

}  // namespace relforge
