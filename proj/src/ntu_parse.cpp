#include "skeltk/ntu_parse.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "skeltk/error.hpp"

namespace skeltk {

namespace {

// Whitespace-delimited token reader that tracks line numbers and byte
// offsets for error reporting.
class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  int line() const { return line_; }
  size_t offset() const { return pos_; }

  bool skip_space() {
    while (pos_ < text_.size()) {
      const char ch = text_[pos_];
      if (ch == '\n') {
        ++line_;
        ++pos_;
      } else if (ch == ' ' || ch == '\t' || ch == '\r') {
        ++pos_;
      } else {
        break;
      }
    }
    return pos_ < text_.size();
  }

  void skip_rest_of_line() {
    while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
  }

  std::string_view next_token(const char* what) {
    if (!skip_space())
      throw ParseError(std::string("skeleton parse: stream truncated while reading ") +
                       what + " at byte offset " + std::to_string(pos_));
    const size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
    return text_.substr(start, pos_ - start);
  }

  int next_int(const char* what) {
    const std::string_view tok = next_token(what);
    int value = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      throw ParseError(std::string("skeleton parse: expected integer for ") + what +
                       " on line " + std::to_string(line_) + ", got \"" +
                       std::string(tok) + "\"");
    return value;
  }

  double next_double(const char* what) {
    const std::string_view tok = next_token(what);
    double value = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      throw ParseError(std::string("skeleton parse: non-numeric ") + what +
                       " on line " + std::to_string(line_) + ", got \"" +
                       std::string(tok) + "\"");
    return value;
  }

 private:
  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1;
};

int decode_field(std::string_view name, size_t pos, char tag, std::string_view orig) {
  if (pos + 3 >= name.size() || name[pos] != tag)
    throw ParseError("filename \"" + std::string(orig) +
                     "\" does not match the SsssCcccPpppRrrrAaaa pattern");
  int value = 0;
  const auto* begin = name.data() + pos + 1;
  const auto res = std::from_chars(begin, begin + 3, value);
  if (res.ec != std::errc{} || res.ptr != begin + 3)
    throw ParseError("filename \"" + std::string(orig) +
                     "\": non-numeric digits after '" + std::string(1, tag) + "'");
  return value;
}

}  // namespace

NtuFileMeta parse_ntu_filename(std::string_view name) {
  const std::string_view orig = name;
  const size_t dot = name.find('.');
  if (dot != std::string_view::npos) name = name.substr(0, dot);
  if (name.size() != 20)
    throw ParseError("filename \"" + std::string(orig) +
                     "\" does not match the SsssCcccPpppRrrrAaaa pattern");
  NtuFileMeta meta;
  meta.setup = decode_field(name, 0, 'S', orig);
  meta.camera = decode_field(name, 4, 'C', orig);
  meta.performer = decode_field(name, 8, 'P', orig);
  meta.replication = decode_field(name, 12, 'R', orig);
  const int action_code = decode_field(name, 16, 'A', orig);
  if (action_code < 1)
    throw ParseError("filename \"" + std::string(orig) + "\": action code must be >= 1");
  meta.action = action_code - 1;
  return meta;
}

SkeletonSequence parse_ntu_skeleton_file(std::string_view text, const NtuFileMeta& meta) {
  Tokenizer tok(text);
  const int frame_count = tok.next_int("frame count");
  if (frame_count < 1)
    throw ParseError("skeleton parse: frame count must be >= 1, got " +
                     std::to_string(frame_count));

  SkeletonSequence seq = SkeletonSequence::zeros(frame_count);
  seq.label = meta.action;
  seq.subject_id = meta.performer;
  seq.camera_id = meta.camera;
  seq.setup_id = meta.setup;

  for (int t = 0; t < frame_count; ++t) {
    int body_count = 0;
    try {
      body_count = tok.next_int("body count");
    } catch (const ParseError&) {
      throw ParseError("skeleton parse: stream truncated at frame " +
                       std::to_string(t + 1) + " of " + std::to_string(frame_count) +
                       " (byte offset " + std::to_string(tok.offset()) + ")");
    }
    if (body_count < 0)
      throw ParseError("skeleton parse: negative body count on line " +
                       std::to_string(tok.line()));
    for (int b = 0; b < body_count; ++b) {
      tok.next_token("body id");
      tok.skip_rest_of_line();  // remaining tracking fields
      const int joint_count = tok.next_int("joint count");
      if (joint_count != kNtuJointCount)
        throw ParseError("skeleton parse: topology mismatch, expected " +
                         std::to_string(kNtuJointCount) + " joints but file declares " +
                         std::to_string(joint_count) + " (line " +
                         std::to_string(tok.line()) + ")");
      for (int v = 0; v < joint_count; ++v) {
        const double x = tok.next_double("joint x coordinate");
        const double y = tok.next_double("joint y coordinate");
        const double z = tok.next_double("joint z coordinate");
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
          throw ParseError("skeleton parse: non-finite coordinate on line " +
                           std::to_string(tok.line()));
        tok.skip_rest_of_line();  // depth/color/orientation/tracking fields
        if (b < kBodySlots) {
          seq.at(t, b, v, 0) = x;
          seq.at(t, b, v, 1) = y;
          seq.at(t, b, v, 2) = z;
        }
      }
    }
  }
  return seq;
}

SkeletonSequence load_ntu_skeleton_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open skeleton file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const NtuFileMeta meta = parse_ntu_filename(path.stem().string());
  SkeletonSequence seq = parse_ntu_skeleton_file(text, meta);
  seq.source_id = path.stem().string();
  return seq;
}

}  // namespace skeltk
