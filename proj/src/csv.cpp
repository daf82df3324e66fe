#include "relforge/csv.hpp"

#include "relforge/common.hpp"

namespace relforge {

CsvData parse_csv(std::string_view text) {
    CsvData out;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        if (out.header.empty())
            out.header = std::move(record);
        else
            out.rows.push_back(std::move(record));
        record.clear();
    };

    size_t i = 0;
    const size_t n = text.size();
    while (i < n) {
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < n && text[i + 1] == '"') {
                    field += '"';
                    i += 2;
                } else {
                    quoted = false;
                    ++i;
                }
            } else {
                field += c;
                ++i;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field.empty() && !field_started) {
                    quoted = true;
                } else {
                    field += c;  // stray quote mid-field, keep verbatim
                }
                field_started = true;
                ++i;
                break;
            case ',':
                end_field();
                ++i;
                break;
            case '\r':
                if (i + 1 < n && text[i + 1] == '\n') {
                    if (!record.empty() || !field.empty() || field_started) end_record();
                    i += 2;
                } else {
                    field += c;
                    ++i;
                }
                break;
            case '\n':
                // blank lines (including the trailing newline) are skipped
                if (!record.empty() || !field.empty() || field_started) end_record();
                ++i;
                break;
            default:
                field += c;
                field_started = true;
                ++i;
                break;
        }
    }
    if (quoted) throw ParseError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) end_record();

    for (size_t r = 0; r < out.rows.size(); ++r) {
        if (out.rows[r].size() != out.header.size())
            throw ParseError("csv: row " + std::to_string(r + 1) + " has " +
                             std::to_string(out.rows[r].size()) + " fields, header has " +
                             std::to_string(out.header.size()));
    }
    return out;
}

}  // namespace relforge
