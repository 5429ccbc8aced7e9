#include "test_support.hpp"

#include "toolsmith/error.hpp"
#include "toolsmith/fsutil.hpp"
#include "toolsmith/log.hpp"

#include <doctest.h>

#include <regex>

using namespace toolsmith;
using testsupport::TempDir;

TEST_SUITE("fsutil") {
  TEST_CASE("sha256 matches the standard test vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("utf8 validation") {
    CHECK(is_valid_utf8("plain ascii"));
    CHECK(is_valid_utf8("caf\xc3\xa9 \xe2\x86\x92"));
    CHECK_FALSE(is_valid_utf8("\xff\xfe"));
    CHECK_FALSE(is_valid_utf8("\xc3"));           // truncated
    CHECK_FALSE(is_valid_utf8("\xc0\xaf"));       // overlong
    CHECK_FALSE(is_valid_utf8("\xed\xa0\x80"));   // surrogate
  }

  TEST_CASE("write and read round trip, creating parents") {
    TempDir t;
    write_file(t / "a/b/c.txt", "hello\n");
    CHECK(read_file(t / "a/b/c.txt") == "hello\n");
    CHECK_THROWS_AS(read_file(t / "missing"), Error);
  }

  TEST_CASE("timestamps") {
    const auto tp = std::chrono::sys_days{std::chrono::year{2026} / 3 / 4} + std::chrono::hours(5) +
                    std::chrono::minutes(6) + std::chrono::seconds(7);
    CHECK(utc_stamp(tp) == "20260304_050607");
    CHECK(utc_iso8601(tp) == "2026-03-04T05:06:07Z");
    CHECK(std::regex_match(utc_stamp(), std::regex(R"(\d{8}_\d{6})")));
  }

  TEST_CASE("containment is lexical") {
    CHECK(is_within("/ws", "/ws/tools/a.py"));
    CHECK(is_within("/ws", "tools/a.py"));
    CHECK_FALSE(is_within("/ws", "/ws/../etc/passwd"));
    CHECK_FALSE(is_within("/ws", "/wsx/a"));
    CHECK(relative_key("/ws", "/ws/tools/a.py") == "tools/a.py");
  }

  TEST_CASE("identifiers and quoting") {
    CHECK(is_safe_identifier("geom_opt-2"));
    CHECK_FALSE(is_safe_identifier(""));
    CHECK_FALSE(is_safe_identifier("a/b"));
    CHECK_FALSE(is_safe_identifier(".."));
    CHECK(shell_quote("simple") == "'simple'");
    CHECK(shell_quote("it's") == "'it'\\''s'");
  }

  TEST_CASE("error carries code and detail") {
    const Error e(ErrorCode::NameConflict, "add exists", {{"name", "add"}});
    CHECK(e.code() == ErrorCode::NameConflict);
    CHECK(std::string(e.what()) == "name-conflict: add exists");
    CHECK(e.detail()["name"] == "add");
  }

  TEST_CASE("log sink can be swapped") {
    std::vector<std::string> seen;
    auto old = log::set_sink([&](const std::string& level, const std::string& msg) { seen.push_back(level + ":" + msg); });
    log::warn("careful");
    log::set_sink(old);
    REQUIRE(seen.size() == 1);
    CHECK(seen[0] == "warn:careful");
  }
}
