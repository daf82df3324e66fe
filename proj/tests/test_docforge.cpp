#include <doctest.h>

#include <algorithm>

#include <json.hpp>

#include "relforge/docforge.hpp"
#include "relforge/rng.hpp"
#include "support/checks.hpp"
#include "support/synthetic.hpp"

using namespace relforge;
using namespace relforge::testing;

namespace {

// users -> orders -> items chain for the nesting examples.
const char* kChainManifest = R"({
  "tables": [
    {"name": "users", "file": "u.csv", "columns": [
      {"name": "user_id", "dtype": "int", "primary_key": true},
      {"name": "name", "dtype": "text"}
    ]},
    {"name": "orders", "file": "o.csv", "timestamp_column": "ts", "columns": [
      {"name": "order_id", "dtype": "int", "primary_key": true},
      {"name": "user_id", "dtype": "int", "foreign_key": {"table": "users", "column": "user_id"}},
      {"name": "ts", "dtype": "timestamp"},
      {"name": "amount", "dtype": "float"}
    ]},
    {"name": "items", "file": "i.csv", "timestamp_column": "ts", "columns": [
      {"name": "item_id", "dtype": "int", "primary_key": true},
      {"name": "order_id", "dtype": "int", "foreign_key": {"table": "orders", "column": "order_id"}},
      {"name": "ts", "dtype": "timestamp"}
    ]}
  ]
})";

IndexedStore chain_store() {
    auto schema = std::make_shared<Schema>(load_schema(kChainManifest));
    std::vector<Table> tables;
    tables.push_back(load_table(*schema, "users", "user_id,name\n1,ann\n"));
    // 7 orders for user 1 at ts 10..70
    std::string orders = "order_id,user_id,ts,amount\n";
    for (int i = 1; i <= 7; ++i)
        orders += std::to_string(i) + ",1," + std::to_string(i * 10) + "," +
                  std::to_string(i) + ".5\n";
    tables.push_back(load_table(*schema, "orders", orders));
    tables.push_back(load_table(*schema, "items", "item_id,order_id,ts\n1,5,51\n2,5,52\n"));
    return build_indexes(schema, std::move(tables));
}

TaskRow chain_task_row(int64_t user, int64_t seed_time) {
    TaskRow row;
    row.fkey_values = {Value{user}};
    row.seed_time = Timestamp{seed_time};
    return row;
}

TaskSpec chain_task_spec() {
    TaskSpec spec;
    spec.name = "chain";
    spec.db_description = "chain db";
    spec.task_description = "chain task";
    spec.task_type = TaskType::BinaryClassification;
    spec.metric = Metric::Auroc;
    spec.entity_fkeys = {{"user_id", Link{"chain", "user_id", "users", "user_id"}}};
    spec.seed_time_column = "as_of";
    spec.target_column = "label";
    return spec;
}

}  // namespace

TEST_CASE("depth zero expands joins only") {
    auto store = chain_store();
    std::set<std::string> visited;
    NestedEntity e =
        add_related_entities("orders", 0, store, 4, 0, 0, visited, Timestamp{1000});
    CHECK(e.children.empty());
    // FK column replaced by the joined user fields
    bool has_join = false;
    for (const auto& [k, v] : e.fields) has_join |= k == "users.name";
    CHECK(has_join);
}

TEST_CASE("n_nest zero attaches no children") {
    auto store = chain_store();
    std::set<std::string> visited;
    NestedEntity e =
        add_related_entities("users", 0, store, 0, 0, 1, visited, Timestamp{1000});
    CHECK(e.children.empty());
}

TEST_CASE("nesting selects the latest pre-cutoff children") {
    auto store = chain_store();
    // cutoff 55: orders at 10..50 eligible (5 of 7), latest two are 50, 40
    std::set<std::string> visited;
    NestedEntity e =
        add_related_entities("users", 0, store, 2, 0, 1, visited, Timestamp{55});
    REQUIRE(e.children.size() == 1);
    CHECK(e.children[0].first == "orders");
    const auto& kids = e.children[0].second;
    REQUIRE(kids.size() == 2);

    // full-scan oracle: enumerate, filter, sort desc, truncate
    std::vector<int64_t> expect;
    for (const Row& r : store.table("orders").rows)
        if (r.timestamp->seconds < 55) expect.push_back(r.timestamp->seconds);
    std::sort(expect.rbegin(), expect.rend());
    expect.resize(2);
    for (size_t i = 0; i < kids.size(); ++i) {
        const Row& row = store.row("orders", kids[i].source_ordinal);
        CHECK(row.timestamp->seconds == expect[i]);
    }
}

TEST_CASE("breadth-first expansion respects the visited rule") {
    auto store = chain_store();
    std::set<std::string> visited;
    NestedEntity e =
        add_related_entities("users", 0, store, 4, 0, 3, visited, Timestamp{100});
    // users -> orders (visited: users, orders), orders -> items; items joins
    // orders but may not re-expand it
    REQUIRE(e.children.size() == 1);
    const auto& orders = e.children[0].second;
    bool found_items = false;
    for (const auto& order : orders)
        for (const auto& [table, kids] : order.children) {
            CHECK(table == "items");
            found_items = true;
        }
    CHECK(found_items);
    CHECK(visited.count("users"));
    CHECK(visited.count("orders"));
    CHECK(visited.count("items"));
}

TEST_CASE("post-cutoff parents are not joined") {
    auto store = chain_store();
    std::set<std::string> visited;
    // item 1 at ts 51 references order 5 at ts 50; with cutoff 30 the item
    // itself would never be selected, but expanding it directly must not leak
    // the order either
    NestedEntity e = add_related_entities("items", 0, store, 0, 0, 0, visited, Timestamp{30});
    for (const auto& [k, v] : e.fields) CHECK(k.rfind("orders.", 0) != 0);
    std::set<std::string> visited2;
    NestedEntity e2 = add_related_entities("items", 0, store, 0, 0, 0, visited2, Timestamp{60});
    bool joined = false;
    for (const auto& [k, v] : e2.fields) joined |= k.rfind("orders.", 0) == 0;
    CHECK(joined);
}

TEST_CASE("related examples filter, order and truncate") {
    TaskRow test_row = chain_task_row(1, 100);
    std::vector<TaskRow> train;
    for (int64_t t : {10, 50, 30}) train.push_back(chain_task_row(1, t));
    train.push_back(chain_task_row(2, 40));   // other entity
    train.push_back(chain_task_row(1, 150));  // future

    auto rel = related_examples(test_row, train, 16);
    REQUIRE(rel.size() == 3);
    CHECK(rel[0].seed_time.seconds == 50);
    CHECK(rel[1].seed_time.seconds == 30);
    CHECK(rel[2].seed_time.seconds == 10);

    CHECK(related_examples(chain_task_row(9, 100), train, 16).empty());
    CHECK(related_examples(test_row, train, 2).size() == 2);
}

TEST_CASE("related examples match a brute-force oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<TaskRow> train;
        for (int i = 0; i < 60; ++i)
            train.push_back(chain_task_row(static_cast<int64_t>(rng.below(6)),
                                           static_cast<int64_t>(rng.below(200))));
        TaskRow test_row = chain_task_row(static_cast<int64_t>(rng.below(6)),
                                          static_cast<int64_t>(rng.below(200)));
        size_t n_rel = rng.below(8);

        std::vector<size_t> expect;
        for (size_t i = 0; i < train.size(); ++i)
            if (train[i].fkey_values[0] == test_row.fkey_values[0] &&
                train[i].seed_time < test_row.seed_time)
                expect.push_back(i);
        std::stable_sort(expect.begin(), expect.end(), [&](size_t a, size_t b) {
            return train[a].seed_time.seconds > train[b].seed_time.seconds;
        });
        if (expect.size() > n_rel) expect.resize(n_rel);

        auto got = related_examples(test_row, train, n_rel);
        REQUIRE(got.size() == expect.size());
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(got[i].seed_time.seconds == train[expect[i]].seed_time.seconds);
    }
}

TEST_CASE("serialization puts the target last and round-trips") {
    NestedEntity e;
    e.fields = {{"a", Value{int64_t{1}}}, {"b", Value{}}};
    CHECK(serialize_entity(e, {{"label", Value{int64_t{1}}}}) ==
          "{\"a\": 1, \"b\": null, \"label\": 1}");
    CHECK(serialize_entity(e, std::nullopt) == "{\"a\": 1, \"b\": null}");

    NestedEntity child;
    child.fields = {{"x", Value{2.5}}};
    e.children = {{"kids", {child}}};
    std::string text = serialize_entity(e, {{"y", Value{std::string("ok\n\"q\"")}}});
    auto parsed = nlohmann::ordered_json::parse(text);  // independent parser
    CHECK(parsed["a"] == 1);
    CHECK(parsed["b"].is_null());
    CHECK(parsed["kids"][0]["x"] == 2.5);
    CHECK(parsed["y"] == "ok\n\"q\"");
    std::string last_key;
    for (const auto& [k, v] : parsed.items()) last_key = k;
    CHECK(last_key == "y");
}

TEST_CASE("documents compose context, examples and the bare test entity") {
    auto syn = make_synthetic({});
    DocParams zero;
    TaskRow row = syn.segment_split.test[0];
    Document doc = build_document(row, 0, syn.segment_spec, syn.segment_split, syn.store, zero,
                                  {});
    // zero-shot: context then exactly one JSON line
    auto blocks = document_blocks(doc.text);
    REQUIRE(blocks.size() == 1);
    CHECK_FALSE(blocks[0].contains("label"));
    CHECK(doc.parts.n_inc_used == 0);
    CHECK(doc.parts.n_rel_used == 0);
    CHECK(doc.text.substr(0, doc.parts.context_chars)
              .find(syn.segment_spec.db_description) != std::string::npos);

    DocParams params{8, 4, 2, 1, 7};
    Timestamp before = row.seed_time;
    for (const TaskRow& r : syn.segment_split.test) before = std::min(before, r.seed_time);
    auto shared = stratified_sample(syn.segment_split.train, params.n_inc, before, params.seed);
    Document full = build_document(row, 0, syn.segment_spec, syn.segment_split, syn.store, params,
                                   shared);
    auto full_blocks = document_blocks(full.text);
    CHECK(full.parts.n_inc_used == 8);
    REQUIRE(full_blocks.size() == 1 + full.parts.n_inc_used + full.parts.n_rel_used);

    // every example block ends with the target, balanced 4/4
    size_t pos = 0, neg = 0;
    for (size_t i = 0; i + 1 < full_blocks.size(); ++i) {
        std::string last_key;
        for (const auto& [k, v] : full_blocks[i].items()) last_key = k;
        CHECK(last_key == "label");
        if (i < full.parts.n_inc_used)
            (full_blocks[i]["label"] == 1 ? pos : neg) += 1;
    }
    CHECK(pos == 4);
    CHECK(neg == 4);
    CHECK_FALSE(full_blocks.back().contains("label"));
}

TEST_CASE("generated fact rows never reach the seed time") {
    auto syn = make_synthetic({});
    DocParams params{8, 8, 4, 1, 3};
    Timestamp before = syn.segment_split.test[0].seed_time;
    for (const TaskRow& r : syn.segment_split.test) before = std::min(before, r.seed_time);
    auto shared = stratified_sample(syn.segment_split.train, params.n_inc, before, params.seed);
    for (size_t i = 0; i < 20 && i < syn.segment_split.test.size(); ++i) {
        const TaskRow& row = syn.segment_split.test[i];
        Document doc = build_document(row, i, syn.segment_spec, syn.segment_split, syn.store,
                                      params, shared);
        CHECK(count_leaks(doc.text, syn.store.schema(), row.seed_time, "as_of") == 0);
    }
}

TEST_CASE("batch construction is identical between serial and parallel") {
    auto syn = make_synthetic({});
    DocParams params{4, 4, 2, 1, 5};
    std::vector<TaskRow> rows(syn.segment_split.test.begin(),
                              syn.segment_split.test.begin() + 40);
    Timestamp before = rows[0].seed_time;
    for (const TaskRow& r : rows) before = std::min(before, r.seed_time);
    auto shared = stratified_sample(syn.segment_split.train, params.n_inc, before, params.seed);

    auto serial = build_documents(rows, syn.segment_spec, syn.segment_split, syn.store, params,
                                  shared, ExecMode::Serial);
    auto parallel = build_documents(rows, syn.segment_spec, syn.segment_split, syn.store, params,
                                    shared, ExecMode::Parallel);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].text == parallel[i].text);
        CHECK(serial[i].token_estimate == parallel[i].token_estimate);
    }
    // regeneration is byte-identical
    auto again = build_documents(rows, syn.segment_spec, syn.segment_split, syn.store, params,
                                 shared, ExecMode::Serial);
    for (size_t i = 0; i < serial.size(); ++i) CHECK(serial[i].text == again[i].text);
}

TEST_CASE("shrink halves the example counts") {
    CHECK(shrink_on_oversize({16, 16, 4, 1, 0}) == DocParams{8, 8, 4, 1, 0});
    CHECK(shrink_on_oversize({1, 0, 4, 1, 0}) == DocParams{0, 0, 4, 1, 0});
    CHECK(shrink_on_oversize({0, 0, 4, 1, 0}) == DocParams{0, 0, 4, 1, 0});
}

TEST_CASE("oversize documents raise the halving hint") {
    auto syn = make_synthetic({});
    DocParams params{8, 8, 4, 1, 3};
    Timestamp before = syn.segment_split.test[0].seed_time;
    auto shared = stratified_sample(syn.segment_split.train, params.n_inc, before, params.seed);
    try {
        build_document(syn.segment_split.test[0], 0, syn.segment_spec, syn.segment_split,
                       syn.store, params, shared, Tokenizer{}, size_t{10});
        FAIL("expected OversizeError");
    } catch (const OversizeError& e) {
        CHECK(e.hint.n_inc == 4);
        CHECK(e.hint.n_rel == 4);
    }
}
