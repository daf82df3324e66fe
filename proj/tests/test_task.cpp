#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "relforge/rng.hpp"
#include "relforge/task.hpp"

using namespace relforge;

namespace {

IndexedStore tiny_store() {
    const char* manifest = R"({
      "tables": [
        {"name": "drivers", "file": "d.csv", "columns": [
          {"name": "driver_id", "dtype": "int", "primary_key": true},
          {"name": "name", "dtype": "text"}
        ]}
      ]
    })";
    auto schema = std::make_shared<Schema>(load_schema(manifest));
    std::vector<Table> tables;
    tables.push_back(load_table(*schema, "drivers", "driver_id,name\n1,ann\n2,bo\n"));
    return build_indexes(schema, std::move(tables));
}

std::string task_manifest(const std::string& dir) {
    return std::string(R"({
      "name": "driver-top3",
      "db_description": "f1 shaped data",
      "task_description": "predict a podium finish",
      "task_type": "binary_classification",
      "metric": "auroc",
      "seed_time_column": "date",
      "target_column": "top3",
      "entity_fkeys": [{"column": "driver_id", "table": "drivers", "pk_column": "driver_id"}],
      "splits": {"train": ")") +
           dir + R"(/train.csv", "validation": ")" + dir + R"(/validation.csv", "test": ")" + dir +
           R"(/test.csv"}
    })";
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

std::vector<TaskRow> make_rows(size_t n, uint64_t seed, double positive_rate = 0.5) {
    Rng rng(seed);
    std::vector<TaskRow> rows;
    for (size_t i = 0; i < n; ++i) {
        TaskRow r;
        r.fkey_values = {Value{static_cast<int64_t>(rng.below(20))}};
        r.seed_time = Timestamp{static_cast<int64_t>(rng.below(100000))};
        r.target = Value{static_cast<int64_t>(rng.unit() < positive_rate ? 1 : 0)};
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace

TEST_CASE("load_task reads a driver-top3 shaped split with 1353 train rows") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "relforge_task_test";
    fs::create_directories(dir);

    std::string train = "driver_id,date,top3\n";
    for (int i = 0; i < 1353; ++i)
        train += std::to_string(1 + i % 2) + ",2004-0" + std::to_string(1 + i % 9) +
                 "-01T00:00:00Z," + std::to_string(i % 2) + "\n";
    write_file((dir / "train.csv").string(), train);
    write_file((dir / "validation.csv").string(),
               "driver_id,date,top3\n1,2005-06-01T00:00:00Z,1\n");
    write_file((dir / "test.csv").string(), "driver_id,date,top3\n2,2010-06-01T00:00:00Z,\n");

    auto store = tiny_store();
    LoadedTask task = load_task(task_manifest(dir.string()), store, ".");
    CHECK(task.split.train.size() == 1353);
    CHECK(task.split.validation.size() == 1);
    CHECK(task.split.test.size() == 1);
    CHECK_FALSE(task.split.test[0].target.has_value());
    CHECK(task.spec.task_type == TaskType::BinaryClassification);
}

TEST_CASE("classification target outside {0,1} is rejected") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "relforge_task_bad";
    fs::create_directories(dir);
    write_file((dir / "train.csv").string(), "driver_id,date,top3\n1,2004-01-01T00:00:00Z,2\n");
    write_file((dir / "validation.csv").string(), "driver_id,date,top3\n");
    write_file((dir / "test.csv").string(), "driver_id,date,top3\n");

    auto store = tiny_store();
    CHECK_THROWS_AS(load_task(task_manifest(dir.string()), store, "."), ValidationError);
}

TEST_CASE("empty validation split loads with a warning") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "relforge_task_emptyval";
    fs::create_directories(dir);
    write_file((dir / "train.csv").string(), "driver_id,date,top3\n1,2004-01-01T00:00:00Z,1\n");
    write_file((dir / "validation.csv").string(), "driver_id,date,top3\n");
    write_file((dir / "test.csv").string(), "driver_id,date,top3\n2,2010-01-01T00:00:00Z,0\n");

    auto store = tiny_store();
    LoadedTask task = load_task(task_manifest(dir.string()), store, ".");
    CHECK(task.split.validation.empty());
    bool warned = false;
    for (const auto& w : task.log.entries)
        if (w.find("validation") != std::string::npos) warned = true;
    CHECK(warned);
}

TEST_CASE("split monotonicity violations warn but load") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "relforge_task_mono";
    fs::create_directories(dir);
    // a train row dated after the validation rows
    write_file((dir / "train.csv").string(), "driver_id,date,top3\n1,2009-01-01T00:00:00Z,1\n");
    write_file((dir / "validation.csv").string(),
               "driver_id,date,top3\n1,2005-06-01T00:00:00Z,0\n");
    write_file((dir / "test.csv").string(), "driver_id,date,top3\n2,2010-01-01T00:00:00Z,\n");

    auto store = tiny_store();
    LoadedTask task = load_task(task_manifest(dir.string()), store, ".");
    bool warned = false;
    for (const auto& w : task.log.entries)
        if (w.find("monotonicity") != std::string::npos) warned = true;
    CHECK(warned);
    CHECK(task.split.train.size() == 1);
}

TEST_CASE("task type and metric must agree") {
    namespace fs = std::filesystem;
    auto dir = fs::temp_directory_path() / "relforge_task_metric";
    fs::create_directories(dir);
    for (const char* split : {"train", "validation", "test"})
        write_file((dir / (std::string(split) + ".csv")).string(), "driver_id,date,top3\n");

    std::string manifest = task_manifest(dir.string());
    auto pos = manifest.find("\"auroc\"");
    REQUIRE(pos != std::string::npos);
    manifest.replace(pos, 7, "\"mae\"");  // classification task, mae metric
    auto store = tiny_store();
    CHECK_THROWS_AS(load_task(manifest, store, "."), ValidationError);
}

TEST_CASE("stratified sampling balances classes") {
    auto rows = make_rows(400, 11);
    Timestamp before{100001};

    auto count_classes = [](const std::vector<TaskRow>& sample) {
        size_t pos = 0, neg = 0;
        for (const auto& r : sample) (r.target->as_int() == 1 ? pos : neg) += 1;
        return std::pair{pos, neg};
    };

    auto s8 = stratified_sample(rows, 8, before, 1);
    auto [p8, n8] = count_classes(s8);
    CHECK(p8 == 4);
    CHECK(n8 == 4);

    auto s5 = stratified_sample(rows, 5, before, 1);
    auto [p5, n5] = count_classes(s5);
    CHECK(p5 == 3);
    CHECK(n5 == 2);
}

TEST_CASE("stratified sampling falls back when one class is missing") {
    auto rows = make_rows(50, 3, 0.0);  // all negatives
    auto sample = stratified_sample(rows, 8, Timestamp{100001}, 9);
    CHECK(sample.size() == 8);
    for (const auto& r : sample) CHECK(r.target->as_int() == 0);
}

TEST_CASE("sampling respects the temporal bound and the seed") {
    auto rows = make_rows(300, 5);
    Timestamp before{50000};

    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto strat = stratified_sample(rows, 16, before, seed);
        for (const auto& r : strat) CHECK(r.seed_time < before);
        auto uni = uniform_sample(rows, 16, before, seed);
        for (const auto& r : uni) CHECK(r.seed_time < before);
    }

    auto a = uniform_sample(rows, 16, before, 77);
    auto b = uniform_sample(rows, 16, before, 77);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].seed_time.seconds == b[i].seed_time.seconds);

    auto c = uniform_sample(rows, 16, before, 78);
    bool differs = false;
    for (size_t i = 0; i < std::min(a.size(), c.size()); ++i)
        if (a[i].seed_time.seconds != c[i].seed_time.seconds) differs = true;
    CHECK(differs);
}

TEST_CASE("uniform sampling degenerates gracefully") {
    auto rows = make_rows(10, 9);
    CHECK(uniform_sample(rows, 0, Timestamp{100001}, 1).empty());
    CHECK(uniform_sample(rows, 50, Timestamp{100001}, 1).size() == 10);
    CHECK(uniform_sample(rows, 5, Timestamp{0}, 1).empty());  // nothing eligible
}

TEST_CASE("stratified class balance holds across availabilities") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        double rate = rng.unit();
        auto rows = make_rows(120, 1000 + trial, rate);
        size_t n = rng.below(20);
        Timestamp before{static_cast<int64_t>(50000 + rng.below(50000))};
        auto sample = stratified_sample(rows, n, before, trial);

        size_t eligible = 0, eligible_pos = 0, eligible_neg = 0;
        for (const auto& r : rows) {
            if (!(r.seed_time < before)) continue;
            ++eligible;
            (r.target->as_int() == 1 ? eligible_pos : eligible_neg) += 1;
        }
        CHECK(sample.size() == std::min(n, eligible));
        size_t pos = 0, neg = 0;
        for (const auto& r : sample) (r.target->as_int() == 1 ? pos : neg) += 1;
        if (eligible_pos > 0 && eligible_neg > 0 && n >= 2 && sample.size() >= 2) {
            CHECK(pos >= 1);
            CHECK(neg >= 1);
        }
        // equal split up to availability; positives take the odd extra
        if (pos + neg == n && eligible_pos >= (n + 1) / 2 && eligible_neg >= n / 2) {
            CHECK(pos == (n + 1) / 2);
            CHECK(neg == n / 2);
        }
    }
}
