#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace relforge {

// RFC-4180 parse: quoted fields, "" escapes, CR LF or LF line ends, embedded
// newlines inside quotes. First record is the header. UTF-8 passes through.
struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvData parse_csv(std::string_view text);

}  // namespace relforge
