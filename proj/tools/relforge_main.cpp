// relforge: relational documents for LLM prediction.
//
// Subcommands: ingest, build-docs, infer, train-head, evaluate, grid.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "relforge/docforge.hpp"
#include "relforge/grid.hpp"
#include "relforge/inference.hpp"
#include "relforge/metrics.hpp"
#include "relforge/mlp.hpp"
#include "relforge/scorer.hpp"
#include "relforge/store.hpp"
#include "relforge/task.hpp"

namespace fs = std::filesystem;
using namespace relforge;

namespace {

uint64_t env_seed() {
    if (const char* env = std::getenv("RELFORGE_SEED"); env && *env)
        return std::strtoull(env, nullptr, 10);
    return 0;
}

DocParams parse_params(const std::string& text, uint64_t seed) {
    DocParams p;
    p.seed = seed;
    std::string token;
    std::istringstream ss(text);
    while (std::getline(ss, token, ',')) {
        auto eq = token.find('=');
        if (eq == std::string::npos)
            throw ParseError("bad --params entry '" + token + "' (want key=value)");
        std::string key = token.substr(0, eq);
        size_t value = std::stoull(token.substr(eq + 1));
        if (key == "n_inc") p.n_inc = value;
        else if (key == "n_rel") p.n_rel = value;
        else if (key == "n_nest") p.n_nest = value;
        else if (key == "d") p.d = value;
        else if (key == "seed") p.seed = value;
        else throw ParseError("unknown --params key '" + key + "'");
    }
    return p;
}

const std::vector<TaskRow>& split_rows(const TaskSplit& split, const std::string& name) {
    if (name == "train") return split.train;
    if (name == "validation") return split.validation;
    if (name == "test") return split.test;
    throw ParseError("unknown split '" + name + "' (train|validation|test)");
}

LoadedTask load_task_file(const std::string& task_path, const IndexedStore& store) {
    return load_task(read_file(task_path), store, fs::path(task_path).parent_path().string());
}

ScorerConfig scorer_config_for(const std::string& scorer_arg) {
    ScorerConfig cfg;
    if (scorer_arg == "mock") {
        cfg.backend = ScorerBackend::Mock;
    } else {
        cfg.backend = ScorerBackend::Http;
        cfg.endpoint = scorer_arg;
    }
    return cfg;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << content;
}

// ------------------------------------------------------------------ ingest

int cmd_ingest(const std::string& schema_path, const std::string& out_dir) {
    IndexedStore store = load_store(schema_path);

    nlohmann::ordered_json summary;
    summary["schema"] = fs::absolute(schema_path).string();
    summary["tables"] = nlohmann::ordered_json::array();
    size_t total_rows = 0;
    for (const TableSpec& spec : store.schema().tables) {
        const Table& t = store.table(spec.name);
        total_rows += t.rows.size();
        summary["tables"].push_back({{"name", spec.name},
                                     {"rows", t.rows.size()},
                                     {"columns", spec.columns.size()},
                                     {"fact", spec.is_fact_table()}});
    }
    summary["total_rows"] = total_rows;
    summary["links"] = nlohmann::ordered_json::array();
    for (const Link& l : store.links())
        summary["links"].push_back(l.fkey_table + "." + l.fkey_column + " -> " + l.pkey_table +
                                   "." + l.pkey_column);
    summary["warnings"] = store.ingest_log().entries;

    fs::create_directories(out_dir);
    write_text((fs::path(out_dir) / "store.json").string(), summary.dump(2) + "\n");

    std::cout << "ingested " << store.schema().tables.size() << " tables, " << total_rows
              << " rows, " << store.links().size() << " links";
    if (!store.ingest_log().empty())
        std::cout << " (" << store.ingest_log().size() << " warnings)";
    std::cout << "\nsummary written to " << (fs::path(out_dir) / "store.json").string() << "\n";
    for (const auto& w : store.ingest_log().entries) std::cerr << "warning: " << w << "\n";
    return 0;
}

// --------------------------------------------------------------- build-docs

int cmd_build_docs(const std::string& schema_path, const std::string& task_path,
                   const std::string& params_text, const std::string& split_name,
                   const std::string& out_path, uint64_t seed, bool serial) {
    IndexedStore store = load_store(schema_path);
    LoadedTask task = load_task_file(task_path, store);
    for (const auto& w : task.log.entries) std::cerr << "warning: " << w << "\n";

    DocParams params = parse_params(params_text, seed);
    const std::vector<TaskRow>& rows = split_rows(task.split, split_name);
    if (rows.empty()) throw ValidationError("split '" + split_name + "' has no rows");

    Timestamp before = rows[0].seed_time;
    for (const TaskRow& r : rows) before = std::min(before, r.seed_time);
    std::vector<TaskRow> shared_inc =
        task.spec.task_type == TaskType::BinaryClassification
            ? stratified_sample(task.split.train, params.n_inc, before, params.seed)
            : uniform_sample(task.split.train, params.n_inc, before, params.seed);

    auto docs = build_documents(rows, task.spec, task.split, store, params, shared_inc,
                                serial ? ExecMode::Serial : ExecMode::Parallel);

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + out_path + "'");
    const bool echo_target = split_name != "test";  // train/val material only
    for (size_t i = 0; i < docs.size(); ++i) {
        std::optional<Value> target;
        if (echo_target && rows[i].target) target = rows[i].target;
        out << document_to_jsonl(docs[i], params, target) << "\n";
    }
    std::cout << "wrote " << docs.size() << " documents to " << out_path << "\n";
    return 0;
}

// -------------------------------------------------------------------- infer

struct JsonlDoc {
    size_t row_id = 0;
    std::string text;
};

std::vector<JsonlDoc> read_docs_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::vector<JsonlDoc> docs;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            docs.push_back({j.at("row_id").get<size_t>(), j.at("text").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return docs;
}

int cmd_infer(const std::string& docs_path, const std::string& scorer_arg,
              const std::string& mode, const std::string& out_path,
              const std::string& schema_path, const std::string& task_path,
              const std::string& head_path, const std::string& oracle_split, bool invert,
              uint64_t seed) {
    auto docs = read_docs_jsonl(docs_path);

    // Task context is needed for regression grids and oracle labels.
    std::optional<IndexedStore> store;
    std::optional<LoadedTask> task;
    if (!task_path.empty()) {
        if (schema_path.empty()) throw ParseError("--task requires --schema");
        store.emplace(load_store(schema_path));
        task.emplace(load_task_file(task_path, *store));
    }

    MockScorer::Options mock_opts;
    mock_opts.seed = seed;
    mock_opts.invert = invert;
    if (!oracle_split.empty()) {
        if (!task) throw ParseError("--oracle-split requires --task");
        const auto& rows = split_rows(task->split, oracle_split);
        for (const JsonlDoc& d : docs) {
            if (d.row_id >= rows.size())
                throw ValidationError("docs row_id " + std::to_string(d.row_id) +
                                      " out of range for split '" + oracle_split + "'");
            if (rows[d.row_id].target)
                mock_opts.truth_by_text[d.text] = rows[d.row_id].target->numeric();
        }
    }
    auto scorer = make_scorer(scorer_config_for(scorer_arg), std::move(mock_opts));

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + out_path + "'");

    size_t failures = 0;
    if (mode == "metric-aware") {
        if (!task) throw ParseError("--mode metric-aware requires --task and --schema");
        CandidateGrid grid;
        if (task->spec.task_type == TaskType::Regression) {
            std::vector<double> targets;
            for (const TaskRow& r : task->split.train)
                if (r.target) targets.push_back(r.target->numeric());
            grid = build_grid(targets, 128);
        }
        for (const JsonlDoc& d : docs) {
            try {
                double value =
                    task->spec.task_type == TaskType::BinaryClassification
                        ? classification_score(scorer->next_token_distribution(d.text))
                        : median_predict(d.text, grid, *scorer);
                out << "{\"row_id\": " << d.row_id << ", \"prediction\": "
                    << nlohmann::json(value).dump() << "}\n";
            } catch (const Error& e) {
                ++failures;
                out << "{\"row_id\": " << d.row_id << ", \"error\": "
                    << nlohmann::json(std::string(e.what())).dump() << "}\n";
            }
        }
    } else if (mode == "mlp-head") {
        if (head_path.empty()) throw ParseError("--mode mlp-head requires --head");
        MlpHead head = load_head(read_file(head_path));
        for (const JsonlDoc& d : docs) {
            try {
                double value = predict(head, scorer->embed_last_token(d.text));
                out << "{\"row_id\": " << d.row_id << ", \"prediction\": "
                    << nlohmann::json(value).dump() << "}\n";
            } catch (const Error& e) {
                ++failures;
                out << "{\"row_id\": " << d.row_id << ", \"error\": "
                    << nlohmann::json(std::string(e.what())).dump() << "}\n";
            }
        }
    } else {
        throw ParseError("unknown --mode '" + mode + "' (metric-aware|mlp-head)");
    }
    std::cout << "scored " << docs.size() - failures << "/" << docs.size() << " documents into "
              << out_path << "\n";
    return failures == docs.size() && !docs.empty() ? 1 : 0;
}

// --------------------------------------------------------------- train-head

int cmd_train_head(const std::string& schema_path, const std::string& task_path,
                   const std::string& params_text, const std::string& scorer_arg,
                   size_t n_train, const std::string& out_path, uint64_t seed) {
    IndexedStore store = load_store(schema_path);
    LoadedTask task = load_task_file(task_path, store);
    DocParams params = parse_params(params_text, seed);

    RunOptions options;
    options.n_train = n_train;
    options.train_cfg.seed = seed;

    MockScorer::Options mock_opts;
    mock_opts.seed = seed;
    auto scorer = make_scorer(scorer_config_for(scorer_arg), std::move(mock_opts));

    // Training subset and its shared in-context set.
    std::vector<TaskRow> train_rows = sample_test(
        task.split.train, std::min(n_train, options.train_cfg.max_train), mix64(seed, 1));
    std::vector<TaskRow> val_rows =
        sample_test(task.split.validation, options.train_cfg.max_val, mix64(seed, 2));
    if (train_rows.empty()) throw ValidationError("train split has no rows");

    Timestamp before_train = train_rows[0].seed_time;
    for (const TaskRow& r : train_rows) before_train = std::min(before_train, r.seed_time);
    std::vector<TaskRow> shared_inc =
        task.spec.task_type == TaskType::BinaryClassification
            ? stratified_sample(task.split.train, params.n_inc, before_train, params.seed)
            : uniform_sample(task.split.train, params.n_inc, before_train, params.seed);

    auto embed_set = [&](const std::vector<TaskRow>& rows) {
        HeadDataset ds;
        for (size_t i = 0; i < rows.size(); ++i) {
            auto r = embed_task_row(rows[i], i, task.spec, task.split, store, params, shared_inc,
                                    *scorer);
            if (!r.ok || !rows[i].target) continue;
            ds.inputs.push_back(std::move(r.embedding));
            ds.targets.push_back(rows[i].target->numeric());
        }
        return ds;
    };
    HeadDataset train_ds = embed_set(train_rows);
    HeadDataset val_ds = embed_set(val_rows);
    if (train_ds.size() == 0) throw ValidationError("no usable training documents");

    OutputMode mode = task.spec.task_type == TaskType::BinaryClassification ? OutputMode::Logit
                                                                            : OutputMode::Linear;
    MlpHead head = init_head(train_ds.inputs[0].dim, 10, mode, seed);
    TrainResult result = train(std::move(head), train_ds, val_ds, options.train_cfg);

    write_text(out_path, save_head(result.head) + "\n");
    std::cout << "trained on " << train_ds.size() << " documents; best epoch "
              << result.best_epoch << " with validation "
              << (task.spec.metric == Metric::Auroc ? "AUROC " : "MAE ")
              << result.best_val_metric << "\nhead written to " << out_path << "\n";
    return 0;
}

// ----------------------------------------------------------------- evaluate

int cmd_evaluate(const std::string& preds_path, const std::string& split_name,
                 const std::string& schema_path, const std::string& task_path) {
    IndexedStore store = load_store(schema_path);
    LoadedTask task = load_task_file(task_path, store);
    const auto& rows = split_rows(task.split, split_name);

    std::ifstream in(preds_path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + preds_path + "'");
    std::vector<double> preds, truths;
    std::string line;
    size_t lineno = 0, skipped = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(preds_path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.contains("prediction")) {
            ++skipped;
            continue;
        }
        size_t row_id = j.at("row_id").get<size_t>();
        if (row_id >= rows.size())
            throw ValidationError("prediction row_id " + std::to_string(row_id) +
                                  " out of range for split '" + split_name + "'");
        if (!rows[row_id].target) {
            ++skipped;
            continue;
        }
        preds.push_back(j.at("prediction").get<double>());
        truths.push_back(rows[row_id].target->numeric());
    }
    if (preds.empty()) throw ValidationError("no evaluable predictions in " + preds_path);

    if (task.spec.metric == Metric::Auroc) {
        std::vector<int> labels(truths.size());
        for (size_t i = 0; i < truths.size(); ++i) labels[i] = truths[i] >= 0.5 ? 1 : 0;
        std::cout << "auroc " << auroc(preds, labels) << " over " << preds.size() << " rows";
    } else {
        std::cout << "mae " << mae(preds, truths) << " over " << preds.size() << " rows";
    }
    if (skipped) std::cout << " (" << skipped << " skipped)";
    std::cout << "\n";
    return 0;
}

// --------------------------------------------------------------------- grid

int cmd_grid(const std::string& schema_path, const std::string& task_path,
             const std::string& grid_name, const std::string& scorer_arg,
             const std::string& mode, const std::string& report_path, uint64_t seed,
             size_t test_cap, size_t val_cap, size_t n_train, bool serial) {
    IndexedStore store = load_store(schema_path);
    LoadedTask task = load_task_file(task_path, store);

    GridSpec grid;
    if (grid_name == "zero") {
        grid = GridSpec{{0}, {0}, {0}, {0}};
    } else if (grid_name != "default") {
        throw ParseError("unknown --grid '" + grid_name + "' (default|zero)");
    }

    RunOptions options;
    options.seeds = {seed};
    options.test_cap = test_cap;
    options.val_cap = val_cap;
    options.n_train = n_train;
    options.exec = serial ? ExecMode::Serial : ExecMode::Parallel;
    if (mode == "metric-aware") options.mode = RunMode::MetricAware;
    else if (mode == "mlp-head") options.mode = RunMode::MlpHead;
    else throw ParseError("unknown --mode '" + mode + "' (metric-aware|mlp-head)");

    MockScorer::Options mock_opts;
    mock_opts.seed = seed;
    auto scorer = make_scorer(scorer_config_for(scorer_arg), std::move(mock_opts));

    RunReport report = run_grid(task.spec, task.split, store, grid, *scorer, options);
    write_text(report_path, report_to_json(report) + "\n");

    std::cout << "ran " << report.configs.size() << " configs";
    if (report.any_valid) {
        std::cout << "; selected n_inc=" << report.selected.n_inc
                  << " n_rel=" << report.selected.n_rel << " n_nest=" << report.selected.n_nest
                  << " d=" << report.selected.d << " with test "
                  << (report.metric == Metric::Auroc ? "AUROC " : "MAE ")
                  << report.selected_test_metric;
    } else {
        std::cout << "; no valid configuration";
    }
    std::cout << "\nreport written to " << report_path << "\n";
    return report.any_valid ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relforge: relational documents for LLM prediction"};
    app.require_subcommand(1);

    uint64_t seed = env_seed();

    // ingest
    std::string schema_path, out_dir = "store";
    auto* ingest = app.add_subcommand("ingest", "load, validate and index a database");
    ingest->add_option("--schema", schema_path, "schema manifest JSON")->required();
    ingest->add_option("--out", out_dir, "output directory for the store summary");

    // build-docs
    std::string bd_schema, bd_task, bd_params = "n_inc=0,n_rel=0,n_nest=0,d=0";
    std::string bd_split = "test", bd_out = "docs.jsonl";
    bool bd_serial = false;
    auto* build = app.add_subcommand("build-docs", "construct documents for a task split");
    build->add_option("--schema", bd_schema, "schema manifest JSON")->required();
    build->add_option("--task", bd_task, "task manifest JSON")->required();
    build->add_option("--params", bd_params, "n_inc=..,n_rel=..,n_nest=..,d=..[,seed=..]");
    build->add_option("--split", bd_split, "train|validation|test");
    build->add_option("--out", bd_out, "output JSONL path");
    build->add_flag("--serial", bd_serial, "disable the OpenMP build path");
    build->add_option("--seed", seed, "sampling seed");

    // infer
    std::string in_docs, in_scorer = "mock", in_mode = "metric-aware", in_out = "preds.jsonl";
    std::string in_schema, in_task, in_head, in_oracle_split;
    bool in_invert = false;
    auto* infer = app.add_subcommand("infer", "score documents into predictions");
    infer->add_option("--docs", in_docs, "documents JSONL")->required();
    infer->add_option("--scorer", in_scorer, "mock or an http endpoint URL");
    infer->add_option("--mode", in_mode, "metric-aware|mlp-head");
    infer->add_option("--out", in_out, "output predictions JSONL");
    infer->add_option("--schema", in_schema, "schema manifest (for --task)");
    infer->add_option("--task", in_task, "task manifest (regression grid / oracle labels)");
    infer->add_option("--head", in_head, "trained head checkpoint (mlp-head mode)");
    infer->add_option("--oracle-split", in_oracle_split,
                      "wire the mock to ground-truth labels of this split");
    infer->add_flag("--invert", in_invert, "invert the oracle mock labels");
    infer->add_option("--seed", seed, "mock seed");

    // train-head
    std::string th_schema, th_task, th_params = "n_inc=0,n_rel=0,n_nest=0,d=0";
    std::string th_scorer = "mock", th_out = "head.json";
    size_t th_n_train = 100000;
    auto* train_head = app.add_subcommand("train-head", "train the MLP head on embeddings");
    train_head->add_option("--schema", th_schema, "schema manifest JSON")->required();
    train_head->add_option("--task", th_task, "task manifest JSON")->required();
    train_head->add_option("--params", th_params, "document parameters");
    train_head->add_option("--scorer", th_scorer, "mock or an http endpoint URL");
    train_head->add_option("--n-train", th_n_train, "training subset size cap");
    train_head->add_option("--out", th_out, "head checkpoint path");
    train_head->add_option("--seed", seed, "training seed");

    // evaluate
    std::string ev_preds, ev_split = "test", ev_schema, ev_task;
    auto* evaluate = app.add_subcommand("evaluate", "compute the task metric for predictions");
    evaluate->add_option("--preds", ev_preds, "predictions JSONL")->required();
    evaluate->add_option("--split", ev_split, "split holding the targets");
    evaluate->add_option("--schema", ev_schema, "schema manifest JSON")->required();
    evaluate->add_option("--task", ev_task, "task manifest JSON")->required();

    // grid
    std::string gr_schema, gr_task, gr_grid = "default", gr_scorer = "mock";
    std::string gr_mode = "metric-aware", gr_report = "report.json";
    size_t gr_test_cap = 10000, gr_val_cap = 10000, gr_n_train = 100000;
    bool gr_serial = false;
    auto* grid = app.add_subcommand("grid", "sweep document parameters and select by validation");
    grid->add_option("--schema", gr_schema, "schema manifest JSON")->required();
    grid->add_option("--task", gr_task, "task manifest JSON")->required();
    grid->add_option("--grid", gr_grid, "default|zero");
    grid->add_option("--scorer", gr_scorer, "mock or an http endpoint URL");
    grid->add_option("--mode", gr_mode, "metric-aware|mlp-head");
    grid->add_option("--report", gr_report, "report JSON path");
    grid->add_option("--test-cap", gr_test_cap, "test subsample cap");
    grid->add_option("--val-cap", gr_val_cap, "validation subsample cap");
    grid->add_option("--n-train", gr_n_train, "MLP training subset size");
    grid->add_flag("--serial", gr_serial, "disable OpenMP parallelism");
    grid->add_option("--seed", seed, "run seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return cmd_ingest(schema_path, out_dir);
        if (*build)
            return cmd_build_docs(bd_schema, bd_task, bd_params, bd_split, bd_out, seed,
                                  bd_serial);
        if (*infer)
            return cmd_infer(in_docs, in_scorer, in_mode, in_out, in_schema, in_task, in_head,
                             in_oracle_split, in_invert, seed);
        if (*train_head)
            return cmd_train_head(th_schema, th_task, th_params, th_scorer, th_n_train, th_out,
                                  seed);
        if (*evaluate) return cmd_evaluate(ev_preds, ev_split, ev_schema, ev_task);
        if (*grid)
            return cmd_grid(gr_schema, gr_task, gr_grid, gr_scorer, gr_mode, gr_report, seed,
                            gr_test_cap, gr_val_cap, gr_n_train, gr_serial);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
