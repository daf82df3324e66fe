#include "relforge/store.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relforge/csv.hpp"

namespace relforge {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Table load_table(const Schema& schema, const std::string& table_name, const std::string& csv_text) {
    const TableSpec& spec = schema.table(table_name);
    CsvData csv = parse_csv(csv_text);

    if (csv.header.size() != spec.columns.size())
        throw ParseError("table '" + table_name + "': header has " +
                         std::to_string(csv.header.size()) + " columns, schema declares " +
                         std::to_string(spec.columns.size()));
    for (size_t i = 0; i < spec.columns.size(); ++i) {
        if (csv.header[i] != spec.columns[i].name)
            throw ParseError("table '" + table_name + "': header column " + std::to_string(i) +
                             " is '" + csv.header[i] + "', expected '" + spec.columns[i].name + "'");
    }

    auto ts_idx = spec.timestamp_column ? spec.column_index(*spec.timestamp_column) : std::nullopt;
    auto pk_idx = spec.primary_key_index();

    Table table;
    table.spec = &spec;
    table.rows.reserve(csv.rows.size());
    std::unordered_map<Value, uint32_t, ValueHash, ValueKeyEq> seen_pk;

    for (size_t r = 0; r < csv.rows.size(); ++r) {
        Row row;
        row.values.reserve(spec.columns.size());
        for (size_t c = 0; c < spec.columns.size(); ++c) {
            try {
                row.values.push_back(parse_cell(csv.rows[r][c], spec.columns[c].dtype));
            } catch (const ParseError& e) {
                throw ParseError("table '" + table_name + "' row " + std::to_string(r + 1) +
                                 " column '" + spec.columns[c].name + "': " + e.what());
            }
        }
        if (ts_idx) {
            const Value& tv = row.values[*ts_idx];
            if (tv.is_null())
                throw ValidationError("table '" + table_name + "' row " + std::to_string(r + 1) +
                                      ": null timestamp in fact table");
            row.timestamp = tv.as_time();
        }
        if (pk_idx) {
            const Value& key = row.values[*pk_idx];
            if (key.is_null())
                throw ValidationError("table '" + table_name + "' row " + std::to_string(r + 1) +
                                      ": null primary key");
            auto [it, inserted] = seen_pk.emplace(key, static_cast<uint32_t>(r));
            if (!inserted)
                throw ValidationError("table '" + table_name + "' row " + std::to_string(r + 1) +
                                      ": duplicate primary key " + render_value(key));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

const Table& IndexedStore::table(const std::string& name) const {
    return tables_[table_index(name)];
}

size_t IndexedStore::table_index(const std::string& name) const {
    auto it = table_by_name_.find(name);
    if (it == table_by_name_.end()) throw ReferenceError("unknown table '" + name + "'");
    return it->second;
}

std::optional<uint32_t> IndexedStore::lookup_pk_ordinal(const std::string& table_name,
                                                        const Value& key) const {
    size_t ti = table_index(table_name);
    if (!tables_[ti].spec->primary_key_index())
        throw ValidationError("table '" + table_name + "' has no primary key");
    const auto& index = pk_index_[ti];
    auto it = index.find(key);
    if (it == index.end()) return std::nullopt;
    return it->second;
}

const Row* IndexedStore::lookup_pk(const std::string& table_name, const Value& key) const {
    auto ord = lookup_pk_ordinal(table_name, key);
    if (!ord) return nullptr;
    return &tables_[table_index(table_name)].rows[*ord];
}

size_t IndexedStore::link_index(const Link& link) const {
    for (size_t i = 0; i < schema_->links.size(); ++i)
        if (schema_->links[i] == link) return i;
    throw ReferenceError("link " + link.fkey_table + "." + link.fkey_column + " -> " +
                         link.pkey_table + " does not belong to this store");
}

std::vector<uint32_t> IndexedStore::lookup_fk_before(const Link& link, const Value& key,
                                                     std::optional<Timestamp> cutoff,
                                                     size_t limit) const {
    size_t li = link_index(link);
    std::vector<uint32_t> out;
    if (limit == 0) return out;
    const auto& index = fk_index_[li];
    auto it = index.find(key);
    if (it == index.end()) return out;

    const Table& child = tables_[table_index(link.fkey_table)];
    const bool fact = child.spec->is_fact_table();
    for (uint32_t ord : it->second) {
        if (fact && cutoff && !(child.rows[ord].timestamp < *cutoff)) continue;
        out.push_back(ord);
        if (out.size() >= limit) break;
    }
    return out;
}

IndexedStore build_indexes(SchemaPtr schema, std::vector<Table> tables) {
    IndexedStore store;
    store.schema_ = std::move(schema);
    store.tables_ = std::move(tables);
    for (size_t i = 0; i < store.tables_.size(); ++i)
        store.table_by_name_[store.tables_[i].spec->name] = i;
    for (const auto& link : store.schema_->links) {
        if (!store.table_by_name_.count(link.fkey_table) ||
            !store.table_by_name_.count(link.pkey_table))
            throw ReferenceError("link endpoint missing: " + link.fkey_table + " -> " +
                                 link.pkey_table);
    }

    // Primary key indexes (uniqueness was enforced at load time).
    store.pk_index_.resize(store.tables_.size());
    for (size_t ti = 0; ti < store.tables_.size(); ++ti) {
        const Table& t = store.tables_[ti];
        auto pk = t.spec->primary_key_index();
        if (!pk) continue;
        store.pk_index_[ti].reserve(t.rows.size());
        for (uint32_t r = 0; r < t.rows.size(); ++r)
            store.pk_index_[ti].emplace(t.rows[r].values[*pk], r);
    }

    // Foreign key indexes, one per link.
    store.fk_index_.resize(store.schema_->links.size());
    for (size_t li = 0; li < store.schema_->links.size(); ++li) {
        const Link& link = store.schema_->links[li];
        const Table& child = store.tables_[store.table_by_name_[link.fkey_table]];
        size_t fk_col = *child.spec->column_index(link.fkey_column);
        size_t parent_ti = store.table_by_name_[link.pkey_table];
        auto& index = store.fk_index_[li];
        size_t dangling = 0;
        for (uint32_t r = 0; r < child.rows.size(); ++r) {
            const Value& key = child.rows[r].values[fk_col];
            if (key.is_null()) continue;
            if (!store.pk_index_[parent_ti].count(key)) {
                if (dangling < 16)
                    store.log_.warn("dangling reference: " + link.fkey_table + "." +
                                    link.fkey_column + "=" + render_value(key) + " (row " +
                                    std::to_string(r + 1) + ") has no match in " +
                                    link.pkey_table);
                ++dangling;
            }
            index[key].push_back(r);
        }
        if (dangling >= 16)
            store.log_.warn("dangling reference: " + link.fkey_table + "." + link.fkey_column +
                            ": " + std::to_string(dangling) + " total");
        const bool fact = child.spec->is_fact_table();
        for (auto& [key, ords] : index) {
            if (fact) {
                std::stable_sort(ords.begin(), ords.end(), [&](uint32_t a, uint32_t b) {
                    return child.rows[a].timestamp > child.rows[b].timestamp;
                });
            }
            // dimension tables keep ingest order = ordinal ascending
        }
    }
    return store;
}

IndexedStore load_store(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    auto schema = std::make_shared<Schema>(load_schema(read_file(manifest_path)));
    fs::path base = fs::path(manifest_path).parent_path();
    std::vector<Table> tables;
    tables.reserve(schema->tables.size());
    for (const auto& spec : schema->tables) {
        if (spec.file.empty())
            throw ParseError("table '" + spec.name + "': manifest has no 'file' entry");
        fs::path p = fs::path(spec.file).is_absolute() ? fs::path(spec.file) : base / spec.file;
        tables.push_back(load_table(*schema, spec.name, read_file(p.string())));
    }
    return build_indexes(schema, std::move(tables));
}

}  // namespace relforge
