#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relforge/store.hpp"

namespace relforge {

enum class TaskType { BinaryClassification, Regression };
enum class Metric { Auroc, Mae };

struct EntityFkey {
    std::string column;  // task-table column name
    Link link;           // into the main database
};

struct TaskSpec {
    std::string name;
    std::string db_description;
    std::string task_description;
    TaskType task_type = TaskType::BinaryClassification;
    Metric metric = Metric::Auroc;
    std::vector<EntityFkey> entity_fkeys;
    std::string seed_time_column;
    std::string target_column;
};

struct TaskRow {
    std::vector<Value> fkey_values;  // aligned with TaskSpec::entity_fkeys
    Timestamp seed_time{};           // t_p
    std::optional<Value> target;     // y; held out of documents for test rows
};

struct TaskSplit {
    std::vector<TaskRow> train;
    std::vector<TaskRow> validation;
    std::vector<TaskRow> test;
};

struct LoadedTask {
    TaskSpec spec;
    TaskSplit split;
    WarningLog log;  // split monotonicity violations etc.
};

// Manifest JSON:
//   { "name", "db_description", "task_description", "task_type", "metric",
//     "seed_time_column", "target_column",
//     "entity_fkeys": [ {"column", "table", "pk_column"} ],
//     "splits": {"train","validation","test"} }
// Split CSV paths resolve against `base_dir` (the manifest's directory).
LoadedTask load_task(const std::string& manifest_text, const IndexedStore& store,
                     const std::string& base_dir = ".");

// Stratified in-context sampling for binary classification: among train rows
// with seed_time < before, positives and negatives split as evenly as n allows
// (positives take the odd extra), interleaved positive-first; deterministic
// per seed. Falls back to whatever class is available.
std::vector<TaskRow> stratified_sample(const std::vector<TaskRow>& train, size_t n,
                                       Timestamp before, uint64_t seed);

// Uniform sampling without replacement among rows with seed_time < before.
std::vector<TaskRow> uniform_sample(const std::vector<TaskRow>& rows, size_t n, Timestamp before,
                                    uint64_t seed);

}  // namespace relforge
