#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace relforge {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed manifest / CSV / JSON input.
struct ParseError : Error {
    using Error::Error;
};

// A name (table, column, link) does not resolve.
struct ReferenceError : Error {
    using Error::Error;
};

// Invariant violation in otherwise well-formed input (duplicate PK, bad target, ...).
struct ValidationError : Error {
    using Error::Error;
};

// Collects non-fatal ingest diagnostics (dangling FKs, split monotonicity, ...).
struct WarningLog {
    std::vector<std::string> entries;

    void warn(std::string msg) { entries.push_back(std::move(msg)); }
    bool empty() const { return entries.empty(); }
    size_t size() const { return entries.size(); }
};

}  // namespace relforge
