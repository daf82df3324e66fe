#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "relforge/common.hpp"
#include "relforge/rng.hpp"

namespace relforge {

// UTC seconds since the Unix epoch.
struct Timestamp {
    int64_t seconds = 0;
    auto operator<=>(const Timestamp&) const = default;
};

// Tagged scalar cell. Exactly one alternative is active; cross-tag comparison
// is a logic error except for null checks.
class Value {
  public:
    enum class Type { Null, Bool, Int, Real, Text, Time };

    Value() : data_(std::monostate{}) {}
    explicit Value(bool b) : data_(b) {}
    explicit Value(int64_t i) : data_(i) {}
    explicit Value(double d) : data_(d) {}
    explicit Value(std::string s) : data_(std::move(s)) {}
    explicit Value(Timestamp t) : data_(t) {}

    Type type() const { return static_cast<Type>(data_.index()); }
    bool is_null() const { return type() == Type::Null; }

    bool as_bool() const { return get<bool>(Type::Bool); }
    int64_t as_int() const { return get<int64_t>(Type::Int); }
    double as_real() const { return get<double>(Type::Real); }
    const std::string& as_text() const { return get<std::string>(Type::Text); }
    Timestamp as_time() const { return get<Timestamp>(Type::Time); }

    // Numeric view: Int and Real both convert, nothing else does.
    double numeric() const {
        if (type() == Type::Int) return static_cast<double>(as_int());
        return as_real();
    }

    friend bool operator==(const Value& a, const Value& b) {
        if (a.is_null() || b.is_null()) return a.is_null() && b.is_null();
        if (a.type() != b.type())
            throw ValidationError("value comparison across type tags");
        return a.data_ == b.data_;
    }

    // Stable 64-bit hash, identical across platforms and runs.
    uint64_t stable_hash() const {
        uint64_t h = mix64(static_cast<uint64_t>(data_.index()));
        switch (type()) {
            case Type::Null: return h;
            case Type::Bool: return mix64(h, as_bool() ? 1 : 0);
            case Type::Int: return mix64(h, static_cast<uint64_t>(as_int()));
            case Type::Real: {
                uint64_t bits;
                double d = as_real();
                static_assert(sizeof(bits) == sizeof(d));
                __builtin_memcpy(&bits, &d, sizeof(bits));
                return mix64(h, bits);
            }
            case Type::Text: return fnv1a64(as_text(), h);
            case Type::Time: return mix64(h, static_cast<uint64_t>(as_time().seconds));
        }
        return h;
    }

  private:
    template <class T>
    const T& get(Type want) const {
        if (type() != want) throw ValidationError("value type mismatch");
        return std::get<T>(data_);
    }

    std::variant<std::monostate, bool, int64_t, double, std::string, Timestamp> data_;
};

struct ValueHash {
    size_t operator()(const Value& v) const { return static_cast<size_t>(v.stable_hash()); }
};

// Index-key equality: total over tags (different tags are simply unequal) so
// hash containers never throw; columns are homogeneous so this never fires.
struct ValueKeyEq {
    bool operator()(const Value& a, const Value& b) const {
        if (a.type() != b.type()) return false;
        return a.is_null() ? b.is_null() : a == b;
    }
};

const char* to_string(Value::Type t);
std::optional<Value::Type> dtype_from_string(std::string_view name);

// RFC-3339 ("2015-05-08T00:00:00Z", 'T' or ' ' separator, optional fractional
// part and offset, bare date allowed) or integer epoch seconds.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

// Parses one CSV cell under the column dtype. Empty text is null.
Value parse_cell(std::string_view text, Value::Type dtype);

// Canonical text form (shortest round-trip for reals, RFC-3339 for times).
std::string render_value(const Value& v);

}  // namespace relforge
