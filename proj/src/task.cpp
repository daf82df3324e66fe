#include "relforge/task.hpp"

#include <algorithm>
#include <filesystem>

#include <json.hpp>

#include "relforge/csv.hpp"
#include "relforge/rng.hpp"

namespace relforge {

namespace {

std::vector<TaskRow> load_split_csv(const TaskSpec& spec, const IndexedStore& store,
                                    const std::string& csv_text, const std::string& split_name) {
    CsvData csv = parse_csv(csv_text);
    auto col_of = [&](const std::string& name) -> size_t {
        for (size_t i = 0; i < csv.header.size(); ++i)
            if (csv.header[i] == name) return i;
        throw ParseError("task split '" + split_name + "': missing column '" + name + "'");
    };

    std::vector<size_t> fk_cols;
    std::vector<Value::Type> fk_dtypes;
    for (const auto& ef : spec.entity_fkeys) {
        fk_cols.push_back(col_of(ef.column));
        const TableSpec& target = store.schema().table(ef.link.pkey_table);
        fk_dtypes.push_back(target.find_column(ef.link.pkey_column)->dtype);
    }
    size_t seed_col = col_of(spec.seed_time_column);
    size_t target_col = col_of(spec.target_column);

    std::vector<TaskRow> rows;
    rows.reserve(csv.rows.size());
    for (size_t r = 0; r < csv.rows.size(); ++r) {
        TaskRow row;
        for (size_t i = 0; i < fk_cols.size(); ++i)
            row.fkey_values.push_back(parse_cell(csv.rows[r][fk_cols[i]], fk_dtypes[i]));
        Value seed = parse_cell(csv.rows[r][seed_col], Value::Type::Time);
        if (seed.is_null())
            throw ValidationError("task split '" + split_name + "' row " + std::to_string(r + 1) +
                                  ": empty seed time");
        row.seed_time = seed.as_time();

        const std::string& raw_target = csv.rows[r][target_col];
        if (!raw_target.empty()) {
            if (spec.task_type == TaskType::BinaryClassification) {
                Value v = parse_cell(raw_target, Value::Type::Int);
                if (v.as_int() != 0 && v.as_int() != 1)
                    throw ValidationError("task split '" + split_name + "' row " +
                                          std::to_string(r + 1) + ": classification target '" +
                                          raw_target + "' is not 0/1");
                row.target = v;
            } else {
                row.target = parse_cell(raw_target, Value::Type::Real);
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::optional<Timestamp> min_seed(const std::vector<TaskRow>& rows) {
    std::optional<Timestamp> m;
    for (const auto& r : rows)
        if (!m || r.seed_time < *m) m = r.seed_time;
    return m;
}

std::optional<Timestamp> max_seed(const std::vector<TaskRow>& rows) {
    std::optional<Timestamp> m;
    for (const auto& r : rows)
        if (!m || *m < r.seed_time) m = r.seed_time;
    return m;
}

}  // namespace

LoadedTask load_task(const std::string& manifest_text, const IndexedStore& store,
                     const std::string& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(manifest_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("task manifest: ") + e.what());
    }

    LoadedTask out;
    TaskSpec& spec = out.spec;
    try {
        spec.name = doc.at("name").get<std::string>();
        spec.db_description = doc.value("db_description", std::string{});
        spec.task_description = doc.value("task_description", std::string{});
        std::string tt = doc.at("task_type").get<std::string>();
        if (tt == "binary_classification")
            spec.task_type = TaskType::BinaryClassification;
        else if (tt == "regression")
            spec.task_type = TaskType::Regression;
        else
            throw ParseError("task manifest: unknown task_type '" + tt + "'");
        std::string metric = doc.at("metric").get<std::string>();
        if (metric == "auroc")
            spec.metric = Metric::Auroc;
        else if (metric == "mae")
            spec.metric = Metric::Mae;
        else
            throw ParseError("task manifest: unknown metric '" + metric + "'");
        spec.seed_time_column = doc.at("seed_time_column").get<std::string>();
        spec.target_column = doc.at("target_column").get<std::string>();
        for (const auto& jf : doc.at("entity_fkeys")) {
            EntityFkey ef;
            ef.column = jf.at("column").get<std::string>();
            std::string table = jf.at("table").get<std::string>();
            std::string pk_col = jf.at("pk_column").get<std::string>();
            const TableSpec& target = store.schema().table(table);
            const ColumnSpec* pk = target.find_column(pk_col);
            if (!pk || !pk->primary_key)
                throw ReferenceError("task manifest: entity fkey target " + table + "." + pk_col +
                                     " is not a primary key");
            ef.link = Link{spec.name, ef.column, table, pk_col};
            spec.entity_fkeys.push_back(std::move(ef));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("task manifest: ") + e.what());
    }
    if (spec.entity_fkeys.empty())
        throw ValidationError("task manifest: entity_fkeys must be non-empty");
    if ((spec.task_type == TaskType::BinaryClassification) != (spec.metric == Metric::Auroc))
        throw ValidationError("task manifest: task_type and metric do not match");

    namespace fs = std::filesystem;
    auto read_split = [&](const char* key) -> std::vector<TaskRow> {
        std::string rel = doc.at("splits").at(key).get<std::string>();
        fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : fs::path(base_dir) / rel;
        return load_split_csv(spec, store, read_file(p.string()), key);
    };
    out.split.train = read_split("train");
    out.split.validation = read_split("validation");
    out.split.test = read_split("test");

    for (const char* name : {"train", "validation", "test"}) {
        const auto& rows = name == std::string("train") ? out.split.train
                           : name == std::string("validation") ? out.split.validation
                                                               : out.split.test;
        if (name != std::string("test")) {
            for (size_t i = 0; i < rows.size(); ++i)
                if (!rows[i].target)
                    throw ValidationError("task split '" + std::string(name) + "' row " +
                                          std::to_string(i + 1) + ": missing target");
        }
        if (rows.empty()) out.log.warn("task split '" + std::string(name) + "' is empty");
    }

    // max(train) <= min(validation) <= min(test); violations warn, never abort
    auto tmax = max_seed(out.split.train);
    auto vmin = min_seed(out.split.validation);
    auto smin = min_seed(out.split.test);
    if (tmax && vmin && *vmin < *tmax)
        out.log.warn("split monotonicity: max train seed time " + format_timestamp(*tmax) +
                     " exceeds min validation seed time " + format_timestamp(*vmin));
    if (vmin && smin && *smin < *vmin)
        out.log.warn("split monotonicity: min validation seed time " + format_timestamp(*vmin) +
                     " exceeds min test seed time " + format_timestamp(*smin));
    return out;
}

std::vector<TaskRow> stratified_sample(const std::vector<TaskRow>& train, size_t n,
                                       Timestamp before, uint64_t seed) {
    std::vector<size_t> pos, neg;
    for (size_t i = 0; i < train.size(); ++i) {
        const TaskRow& r = train[i];
        if (!(r.seed_time < before) || !r.target) continue;
        (r.target->as_int() == 1 ? pos : neg).push_back(i);
    }
    Rng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);

    // Equal split, positives take the odd extra; shortfall in one class is
    // filled from the other.
    size_t want_pos = (n + 1) / 2, want_neg = n / 2;
    size_t take_pos = std::min(want_pos, pos.size());
    size_t take_neg = std::min(want_neg, neg.size());
    size_t spare = n - take_pos - take_neg;
    if (spare > 0) {
        size_t extra_pos = std::min(spare, pos.size() - take_pos);
        take_pos += extra_pos;
        take_neg += std::min(spare - extra_pos, neg.size() - take_neg);
    }

    std::vector<TaskRow> out;
    out.reserve(take_pos + take_neg);
    size_t pi = 0, ni = 0;
    while (pi < take_pos || ni < take_neg) {
        if (pi < take_pos) out.push_back(train[pos[pi++]]);
        if (ni < take_neg) out.push_back(train[neg[ni++]]);
    }
    return out;
}

std::vector<TaskRow> uniform_sample(const std::vector<TaskRow>& rows, size_t n, Timestamp before,
                                    uint64_t seed) {
    std::vector<size_t> eligible;
    for (size_t i = 0; i < rows.size(); ++i)
        if (rows[i].seed_time < before) eligible.push_back(i);
    Rng rng(seed);
    rng.shuffle(eligible);
    if (eligible.size() > n) eligible.resize(n);
    std::vector<TaskRow> out;
    out.reserve(eligible.size());
    for (size_t i : eligible) out.push_back(rows[i]);
    return out;
}

}  // namespace relforge
