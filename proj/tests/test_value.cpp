#include <doctest.h>

#include "relforge/rng.hpp"
#include "relforge/value.hpp"

using namespace relforge;

namespace {

// Naive day-counting oracle, independent of the production conversion.
int64_t epoch_oracle(int year, int month, int day, int hh, int mm, int ss) {
    auto leap = [](int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; };
    static const int days_in[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    int64_t days = 0;
    for (int y = 1970; y < year; ++y) days += leap(y) ? 366 : 365;
    for (int m = 1; m < month; ++m) days += days_in[m - 1] + (m == 2 && leap(year) ? 1 : 0);
    days += day - 1;
    return days * 86400 + hh * 3600 + mm * 60 + ss;
}

}  // namespace

TEST_CASE("timestamp parses RFC-3339 to epoch seconds") {
    CHECK(parse_timestamp("2015-05-08T00:00:00Z").seconds == 1431043200);
    CHECK(parse_timestamp("2015-05-08T00:00:00Z").seconds == epoch_oracle(2015, 5, 8, 0, 0, 0));
    CHECK(parse_timestamp("1970-01-01T00:00:00Z").seconds == 0);
    CHECK(parse_timestamp("2020-02-29T12:30:45Z").seconds == epoch_oracle(2020, 2, 29, 12, 30, 45));
    CHECK(parse_timestamp("2015-05-08 00:00:00").seconds == 1431043200);
    CHECK(parse_timestamp("2015-05-08").seconds == 1431043200 - 0);
    CHECK(parse_timestamp("1431043200").seconds == 1431043200);
    CHECK(parse_timestamp("2015-05-08T02:00:00+02:00").seconds == 1431043200);
    CHECK(parse_timestamp("2015-05-08T00:00:00.123Z").seconds == 1431043200);
    CHECK_THROWS_AS(parse_timestamp("not a date"), ParseError);
    CHECK_THROWS_AS(parse_timestamp("2015-13-01T00:00:00Z"), ParseError);
}

TEST_CASE("timestamp formatting round-trips") {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        int64_t s = static_cast<int64_t>(rng.below(4102444800ULL));  // up to 2100
        Timestamp t{s};
        CHECK(parse_timestamp(format_timestamp(t)).seconds == s);
    }
    CHECK(format_timestamp(Timestamp{1431043200}) == "2015-05-08T00:00:00Z");
}

TEST_CASE("cells parse under declared dtypes") {
    CHECK(parse_cell("", Value::Type::Int).is_null());
    CHECK(parse_cell("42", Value::Type::Int).as_int() == 42);
    CHECK(parse_cell("-3.5", Value::Type::Real).as_real() == -3.5);
    CHECK(parse_cell("true", Value::Type::Bool).as_bool());
    CHECK(parse_cell("0", Value::Type::Bool).as_bool() == false);
    CHECK(parse_cell("hi", Value::Type::Text).as_text() == "hi");
    CHECK(parse_cell("2015-05-08T00:00:00Z", Value::Type::Time).as_time().seconds == 1431043200);
    CHECK_THROWS_AS(parse_cell("4x", Value::Type::Int), ParseError);
    CHECK_THROWS_AS(parse_cell("maybe", Value::Type::Bool), ParseError);
}

TEST_CASE("values compare within a tag and throw across tags") {
    CHECK(Value{int64_t{3}} == Value{int64_t{3}});
    CHECK_FALSE(Value{int64_t{3}} == Value{int64_t{4}});
    CHECK(Value{} == Value{});
    CHECK_FALSE(Value{} == Value{int64_t{1}});  // null check is allowed
    CHECK_THROWS_AS((void)(Value{int64_t{1}} == Value{1.0}), ValidationError);
    CHECK(Value{int64_t{5}}.stable_hash() == Value{int64_t{5}}.stable_hash());
    CHECK(Value{std::string("a")}.stable_hash() != Value{std::string("b")}.stable_hash());
}
