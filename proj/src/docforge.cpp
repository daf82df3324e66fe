#include "relforge/docforge.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <deque>
#include <numeric>

namespace relforge {

namespace {

// ---------------------------------------------------------------- expansion

struct Expander {
    const IndexedStore& store;
    size_t n_nest;
    size_t d_max;
    Timestamp cutoff;
    std::set<std::string>& visited;
    std::deque<std::pair<NestedEntity*, size_t>> queue;  // node, depth

    // Tables whose rows were merged into a node, with their primary key value.
    struct Anchor {
        std::string table;
        Value key;
    };

    // Inlines FK->PK parents of a store row into `fields`; returns the tables
    // (own + joined) that can seed PK->FK expansion.
    std::vector<Anchor> join_fields(NestedEntity& node) {
        const Table& table = store.table(node.source_table);
        const TableSpec& spec = *table.spec;
        const Row& row = table.rows[node.source_ordinal];

        std::vector<Anchor> anchors;
        if (auto pk = spec.primary_key_index())
            anchors.push_back({spec.name, row.values[*pk]});

        std::set<std::string> used_keys;
        for (const auto& [k, v] : node.fields) used_keys.insert(k);
        for (size_t ci = 0; ci < spec.columns.size(); ++ci) {
            const ColumnSpec& col = spec.columns[ci];
            const Value& v = row.values[ci];
            const Row* parent = nullptr;
            if (col.foreign_key && !v.is_null())
                parent = store.lookup_pk(col.foreign_key->table, v);
            // fact-table parents obey the same temporal rule as children;
            // a post-cutoff parent stays a bare key, like a dangling one
            if (parent && parent->timestamp && !(*parent->timestamp < cutoff)) parent = nullptr;
            if (!parent) {
                node.fields.emplace_back(col.name, v);
                used_keys.insert(col.name);
                continue;
            }
            splice_parent(node, *col.foreign_key, col.name, *parent, used_keys);
            visited.insert(col.foreign_key->table);
            anchors.push_back({col.foreign_key->table, v});
        }
        return anchors;
    }

    void splice_parent(NestedEntity& node, const ForeignKeyTarget& fk,
                       const std::string& fk_column, const Row& parent,
                       std::set<std::string>& used_keys) {
        const TableSpec& pspec = store.schema().table(fk.table);
        for (size_t pi = 0; pi < pspec.columns.size(); ++pi) {
            std::string key = fk.table + "." + pspec.columns[pi].name;
            if (used_keys.count(key))  // second FK into the same parent table
                key = fk_column + "." + key;
            used_keys.insert(key);
            node.fields.emplace_back(std::move(key), parent.values[pi]);
        }
    }

    void expand(NestedEntity& node, size_t depth, const std::vector<Anchor>& anchors) {
        if (depth >= d_max) return;
        for (const Anchor& anchor : anchors) {
            for (const Link& link : store.links()) {
                if (link.pkey_table != anchor.table) continue;
                if (visited.count(link.fkey_table)) continue;
                auto ords = store.lookup_fk_before(link, anchor.key, cutoff, n_nest);
                // an empty draw does not claim the table; a later entity in
                // this expansion may still have qualifying children
                if (ords.empty()) continue;
                visited.insert(link.fkey_table);
                std::vector<NestedEntity> kids(ords.size());
                for (size_t i = 0; i < ords.size(); ++i) {
                    kids[i].source_table = link.fkey_table;
                    kids[i].source_ordinal = ords[i];
                }
                node.children.emplace_back(link.fkey_table, std::move(kids));
            }
        }
        // enqueue only after this node's child arrays are final (pointer stability)
        for (auto& [_, kids] : node.children)
            for (auto& kid : kids) queue.emplace_back(&kid, depth + 1);
    }

    // Breadth-first: every node at depth k is joined and its children attached
    // before any node at depth k+1 is processed.
    void run() {
        while (!queue.empty()) {
            auto [node, depth] = queue.front();
            queue.pop_front();
            auto anchors = join_fields(*node);
            expand(*node, depth, anchors);
        }
    }
};

// ------------------------------------------------------------ serialization

void append_json_string(std::string& out, std::string_view s) {
    out += '"';
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += static_cast<char>(c);
                }
        }
    }
    out += '"';
}

void append_json_value(std::string& out, const Value& v) {
    switch (v.type()) {
        case Value::Type::Null: out += "null"; return;
        case Value::Type::Bool: out += v.as_bool() ? "true" : "false"; return;
        case Value::Type::Int: out += std::to_string(v.as_int()); return;
        case Value::Type::Real: {
            double d = v.as_real();
            if (!std::isfinite(d)) {
                out += "null";
                return;
            }
            char buf[32];
            auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), d);
            out.append(buf, p);
            return;
        }
        case Value::Type::Text: append_json_string(out, v.as_text()); return;
        case Value::Type::Time: append_json_string(out, format_timestamp(v.as_time())); return;
    }
}

void append_entity(std::string& out, const NestedEntity& e) {
    out += '{';
    bool first = true;
    auto sep = [&] {
        if (!first) out += ", ";
        first = false;
    };
    for (const auto& [key, value] : e.fields) {
        sep();
        append_json_string(out, key);
        out += ": ";
        append_json_value(out, value);
    }
    for (const auto& [table, kids] : e.children) {
        sep();
        append_json_string(out, table);
        out += ": [";
        for (size_t i = 0; i < kids.size(); ++i) {
            if (i) out += ", ";
            append_entity(out, kids[i]);
        }
        out += ']';
    }
    out += '}';
}

}  // namespace

NestedEntity add_related_entities(const std::string& table_name, uint32_t ordinal,
                                  const IndexedStore& store, size_t n_nest, size_t depth,
                                  size_t d_max, std::set<std::string>& visited, Timestamp cutoff) {
    NestedEntity root;
    root.source_table = table_name;
    root.source_ordinal = ordinal;
    Expander ex{store, n_nest, d_max, cutoff, visited, {}};
    ex.queue.emplace_back(&root, depth);
    ex.run();
    return root;
}

NestedEntity expand_task_row(const TaskRow& row, const TaskSpec& spec, const IndexedStore& store,
                             size_t n_nest, size_t d_max) {
    NestedEntity root;
    std::set<std::string> visited;
    Expander ex{store, n_nest, d_max, row.seed_time, visited, {}};

    std::vector<Expander::Anchor> anchors;
    std::set<std::string> used_keys;
    for (size_t i = 0; i < spec.entity_fkeys.size(); ++i) {
        const EntityFkey& ef = spec.entity_fkeys[i];
        const Value& v = row.fkey_values[i];
        const Row* parent = v.is_null() ? nullptr : store.lookup_pk(ef.link.pkey_table, v);
        if (parent && parent->timestamp && !(*parent->timestamp < row.seed_time)) parent = nullptr;
        if (!parent) {  // dangling or post-seed entity reference: keep the raw column
            root.fields.emplace_back(ef.column, v);
            used_keys.insert(ef.column);
            continue;
        }
        ex.splice_parent(root, ForeignKeyTarget{ef.link.pkey_table, ef.link.pkey_column},
                         ef.column, *parent, used_keys);
        visited.insert(ef.link.pkey_table);
        anchors.push_back({ef.link.pkey_table, v});
    }
    root.fields.emplace_back(spec.seed_time_column, Value{row.seed_time});

    ex.expand(root, 0, anchors);
    ex.run();
    return root;
}

std::vector<TaskRow> related_examples(const TaskRow& test_row, const std::vector<TaskRow>& train,
                                      size_t n_rel) {
    std::vector<size_t> hits;
    for (size_t i = 0; i < train.size(); ++i) {
        const TaskRow& r = train[i];
        if (!(r.seed_time < test_row.seed_time)) continue;
        bool same_entity = true;
        for (size_t k = 0; k < r.fkey_values.size() && same_entity; ++k)
            same_entity = ValueKeyEq{}(r.fkey_values[k], test_row.fkey_values[k]);
        if (same_entity) hits.push_back(i);
    }
    std::stable_sort(hits.begin(), hits.end(), [&](size_t a, size_t b) {
        return train[b].seed_time < train[a].seed_time;  // newest first, ties by ordinal
    });
    if (hits.size() > n_rel) hits.resize(n_rel);
    std::vector<TaskRow> out;
    out.reserve(hits.size());
    for (size_t i : hits) out.push_back(train[i]);
    return out;
}

std::string serialize_entity(const NestedEntity& entity,
                             const std::optional<std::pair<std::string, Value>>& target) {
    std::string out;
    append_entity(out, entity);
    if (target) {
        // splice the target in as the final key
        out.pop_back();  // '}'
        if (out.size() > 1) out += ", ";
        append_json_string(out, target->first);
        out += ": ";
        append_json_value(out, target->second);
        out += '}';
    }
    return out;
}

Document build_document(const TaskRow& test_row, size_t task_row_id, const TaskSpec& spec,
                        const TaskSplit& split, const IndexedStore& store, const DocParams& params,
                        const std::vector<TaskRow>& shared_inc, const Tokenizer& tokenizer,
                        std::optional<size_t> max_tokens) {
    Document doc;
    doc.task_row_id = task_row_id;

    std::string context = spec.db_description + "\n" + spec.task_description + "\n\n";
    doc.parts.context_chars = context.size();
    doc.text = std::move(context);

    auto append_example = [&](const TaskRow& row, bool with_target) {
        NestedEntity e = expand_task_row(row, spec, store, params.n_nest, params.d);
        std::optional<std::pair<std::string, Value>> target;
        if (with_target) {
            if (!row.target)
                throw ValidationError("example row without target in document for task '" +
                                      spec.name + "'");
            target = {spec.target_column, *row.target};
        }
        doc.text += serialize_entity(e, target);
        doc.text += '\n';
    };

    size_t inc_used = std::min(params.n_inc, shared_inc.size());
    for (size_t i = 0; i < inc_used; ++i) append_example(shared_inc[i], true);
    doc.parts.n_inc_used = inc_used;

    auto related = related_examples(test_row, split.train, params.n_rel);
    for (const TaskRow& r : related) append_example(r, true);
    doc.parts.n_rel_used = related.size();

    NestedEntity test_entity = expand_task_row(test_row, spec, store, params.n_nest, params.d);
    doc.text += serialize_entity(test_entity, std::nullopt);

    doc.token_estimate = tokenizer ? tokenizer(doc.text) : estimate_tokens(doc.text);
    if (max_tokens && doc.token_estimate > *max_tokens)
        throw OversizeError("document for row " + std::to_string(task_row_id) + " has " +
                                std::to_string(doc.token_estimate) + " tokens, budget " +
                                std::to_string(*max_tokens),
                            shrink_on_oversize(params));
    return doc;
}

std::vector<Document> build_documents(const std::vector<TaskRow>& rows, const TaskSpec& spec,
                                      const TaskSplit& split, const IndexedStore& store,
                                      const DocParams& params,
                                      const std::vector<TaskRow>& shared_inc, ExecMode mode,
                                      const Tokenizer& tokenizer) {
    std::vector<Document> docs(rows.size());
    if (mode == ExecMode::Serial) {
        for (size_t i = 0; i < rows.size(); ++i)
            docs[i] = build_document(rows[i], i, spec, split, store, params, shared_inc, tokenizer);
        return docs;
    }
    // exceptions must not escape the parallel region
    std::exception_ptr error = nullptr;
    std::atomic<bool> failed{false};
#pragma omp parallel for schedule(dynamic, 16)
    for (size_t i = 0; i < rows.size(); ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            docs[i] = build_document(rows[i], i, spec, split, store, params, shared_inc, tokenizer);
        } catch (...) {
#pragma omp critical
            {
                if (!error) error = std::current_exception();
            }
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (error) std::rethrow_exception(error);
    return docs;
}

DocParams shrink_on_oversize(const DocParams& params) {
    DocParams out = params;
    out.n_inc /= 2;
    out.n_rel /= 2;
    return out;
}

std::string document_to_jsonl(const Document& doc, const DocParams& params,
                              const std::optional<Value>& target) {
    std::string out = "{\"row_id\": " + std::to_string(doc.task_row_id) + ", \"params\": ";
    out += "{\"n_inc\": " + std::to_string(params.n_inc) + ", \"n_rel\": " +
           std::to_string(params.n_rel) + ", \"n_nest\": " + std::to_string(params.n_nest) +
           ", \"d\": " + std::to_string(params.d) + ", \"seed\": " + std::to_string(params.seed) +
           "}";
    out += ", \"text\": ";
    append_json_string(out, doc.text);
    out += ", \"token_estimate\": " + std::to_string(doc.token_estimate);
    if (target) {
        out += ", \"target\": ";
        append_json_value(out, *target);
    }
    out += "}";
    return out;
}

}  // namespace relforge
