#include "relforge/value.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace relforge {

namespace {

// Days from civil date, epoch 1970-01-01 (Howard Hinnant's algorithm).
int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

int parse_fixed(std::string_view s, size_t pos, size_t len) {
    int v = 0;
    if (pos + len > s.size()) throw ParseError("timestamp too short: '" + std::string(s) + "'");
    for (size_t i = pos; i < pos + len; ++i) {
        char c = s[i];
        if (c < '0' || c > '9') throw ParseError("bad digit in timestamp: '" + std::string(s) + "'");
        v = v * 10 + (c - '0');
    }
    return v;
}

}  // namespace

const char* to_string(Value::Type t) {
    switch (t) {
        case Value::Type::Null: return "null";
        case Value::Type::Bool: return "bool";
        case Value::Type::Int: return "int";
        case Value::Type::Real: return "float";
        case Value::Type::Text: return "text";
        case Value::Type::Time: return "timestamp";
    }
    return "?";
}

std::optional<Value::Type> dtype_from_string(std::string_view name) {
    if (name == "bool") return Value::Type::Bool;
    if (name == "int") return Value::Type::Int;
    if (name == "float") return Value::Type::Real;
    if (name == "text") return Value::Type::Text;
    if (name == "timestamp") return Value::Type::Time;
    return std::nullopt;
}

Timestamp parse_timestamp(std::string_view text) {
    // Integer epoch seconds (optionally signed).
    {
        std::string_view body = text;
        if (!body.empty() && (body[0] == '-' || body[0] == '+')) body.remove_prefix(1);
        if (all_digits(body)) {
            int64_t v = 0;
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec == std::errc() && p == text.data() + text.size()) return Timestamp{v};
        }
    }
    // YYYY-MM-DD[( |T)HH:MM:SS[.frac]][Z|±hh:mm]
    int year = parse_fixed(text, 0, 4);
    if (text.size() < 10 || text[4] != '-' || text[7] != '-')
        throw ParseError("unrecognized timestamp: '" + std::string(text) + "'");
    int month = parse_fixed(text, 5, 2);
    int day = parse_fixed(text, 8, 2);
    if (month < 1 || month > 12 || day < 1 || day > 31)
        throw ParseError("timestamp out of range: '" + std::string(text) + "'");
    int hh = 0, mm = 0, ss = 0;
    int64_t offset = 0;
    size_t pos = 10;
    if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
        hh = parse_fixed(text, pos + 1, 2);
        mm = parse_fixed(text, pos + 4, 2);
        ss = parse_fixed(text, pos + 7, 2);
        if (text[pos + 3] != ':' || text[pos + 6] != ':')
            throw ParseError("unrecognized timestamp: '" + std::string(text) + "'");
        pos += 9;
        if (pos < text.size() && text[pos] == '.') {  // fractional seconds truncate
            ++pos;
            while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
        }
    }
    if (pos < text.size()) {
        if (text[pos] == 'Z') {
            ++pos;
        } else if (text[pos] == '+' || text[pos] == '-') {
            int sign = text[pos] == '+' ? 1 : -1;
            int oh = parse_fixed(text, pos + 1, 2);
            if (pos + 3 >= text.size() || text[pos + 3] != ':')
                throw ParseError("bad timezone offset: '" + std::string(text) + "'");
            int om = parse_fixed(text, pos + 4, 2);
            offset = -sign * (oh * 3600 + om * 60);
            pos += 6;
        }
    }
    if (pos != text.size())
        throw ParseError("trailing characters in timestamp: '" + std::string(text) + "'");
    if (hh > 23 || mm > 59 || ss > 60)
        throw ParseError("timestamp out of range: '" + std::string(text) + "'");
    int64_t days = days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day));
    return Timestamp{days * 86400 + hh * 3600 + mm * 60 + ss + offset};
}

std::string format_timestamp(Timestamp t) {
    int64_t days = t.seconds / 86400;
    int64_t rem = t.seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int64_t y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(y), m, d, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
    return buf;
}

Value parse_cell(std::string_view text, Value::Type dtype) {
    if (text.empty()) return Value{};
    switch (dtype) {
        case Value::Type::Null:
            throw ParseError("column declared with null dtype");
        case Value::Type::Bool: {
            if (text == "true" || text == "True" || text == "1") return Value{true};
            if (text == "false" || text == "False" || text == "0") return Value{false};
            throw ParseError("bad bool cell: '" + std::string(text) + "'");
        }
        case Value::Type::Int: {
            int64_t v = 0;
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || p != text.data() + text.size())
                throw ParseError("bad int cell: '" + std::string(text) + "'");
            return Value{v};
        }
        case Value::Type::Real: {
            double v = 0;
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v))
                throw ParseError("bad float cell: '" + std::string(text) + "'");
            return Value{v};
        }
        case Value::Type::Text:
            return Value{std::string(text)};
        case Value::Type::Time:
            return Value{parse_timestamp(text)};
    }
    throw ParseError("unreachable dtype");
}

std::string render_value(const Value& v) {
    switch (v.type()) {
        case Value::Type::Null: return "null";
        case Value::Type::Bool: return v.as_bool() ? "true" : "false";
        case Value::Type::Int: return std::to_string(v.as_int());
        case Value::Type::Real: {
            char buf[32];
            auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v.as_real());
            return std::string(buf, p);
        }
        case Value::Type::Text: return v.as_text();
        case Value::Type::Time: return format_timestamp(v.as_time());
    }
    return "";
}

}  // namespace relforge
