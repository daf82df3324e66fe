#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relforge/common.hpp"
#include "relforge/schema.hpp"
#include "relforge/value.hpp"

namespace relforge {

using SchemaPtr = std::shared_ptr<const Schema>;

// One typed row; values are positional in declared column order.
struct Row {
    std::vector<Value> values;
    std::optional<Timestamp> timestamp;  // present iff the table is a fact table
};

struct Table {
    const TableSpec* spec = nullptr;  // points into the shared Schema
    std::vector<Row> rows;
};

// Returns a typed Table; "" cells parse to null, timestamp column is mirrored
// into Row::timestamp, primary-key uniqueness is enforced here.
Table load_table(const Schema& schema, const std::string& table_name, const std::string& csv_text);

// Hash indexes over primary and foreign keys. fk_index lists are sorted
// (timestamp desc, ordinal asc); null FKs are not indexed; dangling references
// are logged during the build, never fatal. Immutable after construction and
// safe to share across threads.
class IndexedStore {
  public:
    const Schema& schema() const { return *schema_; }
    const std::vector<Link>& links() const { return schema_->links; }
    const WarningLog& ingest_log() const { return log_; }

    const Table& table(const std::string& name) const;
    size_t table_index(const std::string& name) const;
    const Row& row(const std::string& table_name, uint32_t ordinal) const {
        return table(table_name).rows[ordinal];
    }

    std::optional<uint32_t> lookup_pk_ordinal(const std::string& table_name, const Value& key) const;
    const Row* lookup_pk(const std::string& table_name, const Value& key) const;

    // Up to `limit` rows of link.fkey_table referencing `key`. Fact-table rows
    // must satisfy timestamp < cutoff when a cutoff is given; dimension rows
    // always pass. Order: (timestamp desc, ordinal asc).
    std::vector<uint32_t> lookup_fk_before(const Link& link, const Value& key,
                                           std::optional<Timestamp> cutoff, size_t limit) const;

    size_t link_index(const Link& link) const;

    friend IndexedStore build_indexes(SchemaPtr schema, std::vector<Table> tables);

  private:
    SchemaPtr schema_;
    std::vector<Table> tables_;
    std::unordered_map<std::string, size_t> table_by_name_;
    // per table: primary key value -> row ordinal
    std::vector<std::unordered_map<Value, uint32_t, ValueHash, ValueKeyEq>> pk_index_;
    // per link: foreign key value -> ordinals sorted (timestamp desc, ordinal asc)
    std::vector<std::unordered_map<Value, std::vector<uint32_t>, ValueHash, ValueKeyEq>> fk_index_;
    WarningLog log_;
};

// Tables must have been loaded against *schema (their spec pointers are into it).
IndexedStore build_indexes(SchemaPtr schema, std::vector<Table> tables);

// Convenience: read the manifest at `manifest_path`, load every table CSV
// (paths resolved against the manifest directory) and build indexes.
IndexedStore load_store(const std::string& manifest_path);

std::string read_file(const std::string& path);

}  // namespace relforge
