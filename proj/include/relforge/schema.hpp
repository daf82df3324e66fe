#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "relforge/value.hpp"

namespace relforge {

struct ForeignKeyTarget {
    std::string table;
    std::string column;
    bool operator==(const ForeignKeyTarget&) const = default;
};

struct ColumnSpec {
    std::string name;
    Value::Type dtype = Value::Type::Text;
    bool primary_key = false;
    std::optional<ForeignKeyTarget> foreign_key;
};

struct TableSpec {
    std::string name;
    std::string file;  // CSV path, relative to the manifest
    std::vector<ColumnSpec> columns;
    std::optional<std::string> timestamp_column;

    const ColumnSpec* find_column(const std::string& name) const;
    std::optional<size_t> column_index(const std::string& name) const;
    std::optional<size_t> primary_key_index() const;
    bool is_fact_table() const { return timestamp_column.has_value(); }
};

// FK column in fkey_table pointing at the primary key of pkey_table.
struct Link {
    std::string fkey_table;
    std::string fkey_column;
    std::string pkey_table;
    std::string pkey_column;
    bool operator==(const Link&) const = default;
};

struct Schema {
    std::vector<TableSpec> tables;
    std::vector<Link> links;  // derived 1:1 from foreign_key entries, declaration order

    const TableSpec* find_table(const std::string& name) const;
    const TableSpec& table(const std::string& name) const;
};

// Parses and validates the manifest JSON:
//   { "tables": [ { "name", "file", "timestamp_column"?, "columns":
//       [ { "name", "dtype", "primary_key"?: true, "foreign_key"?: {"table","column"} } ] } ] }
Schema load_schema(const std::string& manifest_text);

}  // namespace relforge
