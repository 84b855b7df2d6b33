#include <doctest.h>

#include <sstream>
#include <string>

#include "skeltk/error.hpp"
#include "skeltk/ntu_parse.hpp"

using namespace skeltk;

namespace {

// Minimal well-formed capture file: T frames, one body, 25 joints whose x
// coordinate encodes (t, v).
std::string make_skeleton_text(int frames, int joints = 25) {
  std::ostringstream out;
  out << frames << "\n";
  for (int t = 0; t < frames; ++t) {
    out << 1 << "\n";
    out << "72057594037931101 0 1 1 1 1 0.1 0.2 2 2\n";
    out << joints << "\n";
    for (int v = 0; v < joints; ++v)
      out << (t + 0.01 * v) << " " << -1.5 << " " << 3.25
          << " 100 200 300 400 0 0 0 0 2\n";
  }
  return out.str();
}

}  // namespace

TEST_CASE("filename pattern decodes all five fields") {
  auto meta = parse_ntu_filename("S001C002P003R004A043");
  CHECK(meta.setup == 1);
  CHECK(meta.camera == 2);
  CHECK(meta.performer == 3);
  CHECK(meta.replication == 4);
  CHECK(meta.action == 42);  // zero-based
}

TEST_CASE("filename extension is ignored") {
  auto meta = parse_ntu_filename("S017C003P020R002A120.skeleton");
  CHECK(meta.setup == 17);
  CHECK(meta.action == 119);
}

TEST_CASE("malformed filenames are rejected") {
  CHECK_THROWS_AS(parse_ntu_filename("S001C002P003R004"), ParseError);
  CHECK_THROWS_AS(parse_ntu_filename("X001C002P003R004A043"), ParseError);
  CHECK_THROWS_AS(parse_ntu_filename("S001C002P003R004A0xx"), ParseError);
  CHECK_THROWS_AS(parse_ntu_filename(""), ParseError);
  CHECK_THROWS_AS(parse_ntu_filename("S001C002P003R004A000"), ParseError);
}

TEST_CASE("skeleton text parses into a padded two-body sequence") {
  NtuFileMeta meta = parse_ntu_filename("S001C001P001R001A007");
  auto seq = parse_ntu_skeleton_file(make_skeleton_text(3), meta);
  CHECK(seq.frames == 3);
  CHECK(seq.bodies == 2);
  CHECK(seq.joints == 25);
  CHECK(seq.label == 6);
  CHECK(seq.subject_id == 1);
  CHECK(seq.at(2, 0, 4, 0) == doctest::Approx(2.04));
  CHECK(seq.at(1, 0, 0, 1) == doctest::Approx(-1.5));
  CHECK(seq.at(0, 0, 24, 2) == doctest::Approx(3.25));
  // the absent second body stays zero
  for (int t = 0; t < 3; ++t)
    for (int v = 0; v < 25; ++v)
      for (int c = 0; c < 3; ++c) CHECK(seq.at(t, 1, v, c) == 0.0);
}

TEST_CASE("joint count other than 25 is a topology mismatch") {
  NtuFileMeta meta{};
  try {
    parse_ntu_skeleton_file(make_skeleton_text(1, 20), meta);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("topology mismatch") != std::string::npos);
  }
}

TEST_CASE("truncated stream names the frame where it stopped") {
  NtuFileMeta meta{};
  std::string text = make_skeleton_text(5);
  text.resize(text.size() / 2);
  try {
    parse_ntu_skeleton_file(text, meta);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
}

TEST_CASE("non-numeric coordinates are rejected with a line number") {
  NtuFileMeta meta{};
  std::string text = "1\n1\nbodyid 0 0 0 0 0 0 0 0 0\n25\n";
  text += "abc 1.0 2.0\n";
  for (int v = 1; v < 25; ++v) text += "0 0 0\n";
  try {
    parse_ntu_skeleton_file(text, meta);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line") != std::string::npos);
    CHECK(msg.find("abc") != std::string::npos);
  }
}

TEST_CASE("zero frame count is rejected") {
  NtuFileMeta meta{};
  CHECK_THROWS_AS(parse_ntu_skeleton_file("0\n", meta), ParseError);
}

TEST_CASE("a third tracked body is dropped") {
  std::ostringstream out;
  out << 1 << "\n" << 3 << "\n";
  for (int b = 0; b < 3; ++b) {
    out << "id" << b << " 0 0 0 0 0 0 0 0 0\n" << 25 << "\n";
    for (int v = 0; v < 25; ++v) out << (10.0 * b) << " 0 0 extra\n";
  }
  NtuFileMeta meta{};
  auto seq = parse_ntu_skeleton_file(out.str(), meta);
  CHECK(seq.at(0, 0, 3, 0) == doctest::Approx(0.0));
  CHECK(seq.at(0, 1, 3, 0) == doctest::Approx(10.0));
}
