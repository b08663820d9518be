#include <doctest.h>

#include "distviz/csv.hpp"

#include <sstream>

using namespace distviz;

TEST_CASE("plain table with header") {
    auto t = csv::parse("a,b\n1,2\n3,4\n");
    CHECK(t.header == csv::Row{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1] == csv::Row{"3", "4"});
    CHECK(t.column("b") == 1);
    CHECK_FALSE(t.column("c").has_value());
    CHECK(t.lines == std::vector<std::size_t>{2, 3});
}

TEST_CASE("quoted fields keep delimiters, quotes and newlines") {
    auto t = csv::parse("x,y\n\"a,b\",\"he said \"\"hi\"\"\"\n\"multi\nline\",z\nlast,row\n");
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0][0] == "a,b");
    CHECK(t.rows[0][1] == "he said \"hi\"");
    CHECK(t.rows[1][0] == "multi\nline");
    CHECK(t.lines[2] == 5);
}

TEST_CASE("CRLF line endings and missing final newline") {
    auto t = csv::parse("a;b\r\n1;2\r\n3;4", ';');
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1] == csv::Row{"3", "4"});
}

TEST_CASE("headerless parsing and empty fields") {
    auto t = csv::parse("1,,3\n", ',', false);
    CHECK(t.header.empty());
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0] == csv::Row{"1", "", "3"});
}

TEST_CASE("unterminated quote is an error") {
    CHECK_THROWS(csv::parse("a\n\"open\n"));
}

TEST_CASE("escape and write_row round-trip") {
    CHECK(csv::escape("plain") == "plain");
    CHECK(csv::escape("a,b") == "\"a,b\"");
    CHECK(csv::escape("q\"") == "\"q\"\"\"");
    std::ostringstream out;
    csv::write_row(out, {"x", "a,b", "c\nd"});
    auto t = csv::parse(out.str(), ',', false);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0] == csv::Row{"x", "a,b", "c\nd"});
}
