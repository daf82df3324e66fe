#include "relforge/schema.hpp"

#include <set>

#include <json.hpp>

#include "relforge/common.hpp"

namespace relforge {

const ColumnSpec* TableSpec::find_column(const std::string& col) const {
    for (const auto& c : columns)
        if (c.name == col) return &c;
    return nullptr;
}

std::optional<size_t> TableSpec::column_index(const std::string& col) const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].name == col) return i;
    return std::nullopt;
}

std::optional<size_t> TableSpec::primary_key_index() const {
    for (size_t i = 0; i < columns.size(); ++i)
        if (columns[i].primary_key) return i;
    return std::nullopt;
}

const TableSpec* Schema::find_table(const std::string& name) const {
    for (const auto& t : tables)
        if (t.name == name) return &t;
    return nullptr;
}

const TableSpec& Schema::table(const std::string& name) const {
    const TableSpec* t = find_table(name);
    if (!t) throw ReferenceError("unknown table '" + name + "'");
    return *t;
}

Schema load_schema(const std::string& manifest_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(manifest_text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("schema manifest: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("tables") || !doc["tables"].is_array())
        throw ParseError("schema manifest: missing 'tables' array");

    Schema schema;
    std::set<std::string> table_names;
    for (const auto& jt : doc["tables"]) {
        TableSpec t;
        if (!jt.contains("name") || !jt["name"].is_string())
            throw ParseError("schema manifest: table without 'name'");
        t.name = jt["name"].get<std::string>();
        if (!table_names.insert(t.name).second)
            throw ValidationError("duplicate table name '" + t.name + "'");
        t.file = jt.value("file", std::string{});
        if (jt.contains("timestamp_column"))
            t.timestamp_column = jt["timestamp_column"].get<std::string>();

        if (!jt.contains("columns") || !jt["columns"].is_array() || jt["columns"].empty())
            throw ParseError("table '" + t.name + "': missing 'columns'");
        std::set<std::string> col_names;
        size_t pk_count = 0;
        for (const auto& jc : jt["columns"]) {
            ColumnSpec c;
            c.name = jc.at("name").get<std::string>();
            if (!col_names.insert(c.name).second)
                throw ValidationError("table '" + t.name + "': duplicate column '" + c.name + "'");
            auto dtype = dtype_from_string(jc.at("dtype").get<std::string>());
            if (!dtype)
                throw ParseError("table '" + t.name + "': column '" + c.name +
                                 "': unknown dtype '" + jc.at("dtype").get<std::string>() + "'");
            c.dtype = *dtype;
            c.primary_key = jc.value("primary_key", false);
            if (c.primary_key) ++pk_count;
            if (jc.contains("foreign_key")) {
                const auto& fk = jc["foreign_key"];
                c.foreign_key = ForeignKeyTarget{fk.at("table").get<std::string>(),
                                                 fk.at("column").get<std::string>()};
            }
            t.columns.push_back(std::move(c));
        }
        if (pk_count > 1)
            throw ValidationError("table '" + t.name + "': more than one primary key column");
        if (t.timestamp_column) {
            const ColumnSpec* ts = t.find_column(*t.timestamp_column);
            if (!ts)
                throw ReferenceError("table '" + t.name + "': timestamp_column '" +
                                     *t.timestamp_column + "' not declared");
            if (ts->dtype != Value::Type::Time)
                throw ValidationError("table '" + t.name + "': timestamp_column must have dtype timestamp");
        }
        schema.tables.push_back(std::move(t));
    }

    // Resolve foreign keys into links once every table is known.
    for (const auto& t : schema.tables) {
        for (const auto& c : t.columns) {
            if (!c.foreign_key) continue;
            const TableSpec* target = schema.find_table(c.foreign_key->table);
            if (!target)
                throw ReferenceError("table '" + t.name + "': column '" + c.name +
                                     "': foreign key target table '" + c.foreign_key->table +
                                     "' does not exist");
            const ColumnSpec* tc = target->find_column(c.foreign_key->column);
            if (!tc)
                throw ReferenceError("table '" + t.name + "': column '" + c.name +
                                     "': foreign key target column '" + c.foreign_key->column +
                                     "' does not exist in '" + target->name + "'");
            if (!tc->primary_key)
                throw ValidationError("table '" + t.name + "': column '" + c.name +
                                      "': foreign key target '" + target->name + "." + tc->name +
                                      "' is not a primary key");
            if (tc->dtype != c.dtype)
                throw ValidationError("table '" + t.name + "': column '" + c.name +
                                      "': dtype differs from foreign key target");
            schema.links.push_back(Link{t.name, c.name, target->name, tc->name});
        }
    }
    return schema;
}

}  // namespace relforge
