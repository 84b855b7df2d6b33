#include "skeltk/sequence_json.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skeltk/error.hpp"
#include "skeltk/ntu_parse.hpp"

namespace skeltk {

using nlohmann::json;

namespace {

int require_int(const json& doc, const char* field) {
  if (!doc.contains(field))
    throw ParseError(std::string("sequence JSON: missing field \"") + field + "\"");
  const json& v = doc.at(field);
  if (!v.is_number_integer())
    throw ParseError(std::string("sequence JSON: field \"") + field +
                     "\" must be an integer");
  return v.get<int>();
}

}  // namespace

SkeletonSequence load_json_sequence(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("sequence JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("sequence JSON: document must be an object");

  SkeletonSequence seq;
  seq.label = require_int(doc, "label");
  seq.subject_id = require_int(doc, "subject_id");
  seq.camera_id = require_int(doc, "camera_id");
  seq.setup_id = require_int(doc, "setup_id");
  if (doc.contains("source_id")) {
    if (!doc.at("source_id").is_string())
      throw ParseError("sequence JSON: field \"source_id\" must be a string");
    seq.source_id = doc.at("source_id").get<std::string>();
  }

  if (!doc.contains("frames"))
    throw ParseError("sequence JSON: missing field \"frames\"");
  const json& frames = doc.at("frames");
  if (!frames.is_array() || frames.empty())
    throw ParseError("sequence JSON: field \"frames\" must be a non-empty array");

  const int T = static_cast<int>(frames.size());
  const json& f0 = frames.at(0);
  if (!f0.is_array() || f0.empty())
    throw ParseError("sequence JSON: frame 0 must be a non-empty array of bodies");
  const int m_in = static_cast<int>(f0.size());
  if (m_in > kBodySlots)
    throw ParseError("sequence JSON: at most " + std::to_string(kBodySlots) +
                     " bodies supported, got " + std::to_string(m_in));
  const json& b0 = f0.at(0);
  if (!b0.is_array() || b0.empty())
    throw ParseError("sequence JSON: body 0 must be a non-empty array of joints");
  const int V = static_cast<int>(b0.size());
  const json& j0 = b0.at(0);
  if (!j0.is_array() || j0.empty())
    throw ParseError("sequence JSON: joint 0 must be a non-empty coordinate array");
  const int C = static_cast<int>(j0.size());

  seq.frames = T;
  seq.bodies = kBodySlots;
  seq.joints = V;
  seq.channels = C;
  seq.data.assign(static_cast<size_t>(seq.value_count()), 0.0);

  for (int t = 0; t < T; ++t) {
    const json& frame = frames.at(t);
    if (!frame.is_array() || static_cast<int>(frame.size()) != m_in)
      throw ParseError("sequence JSON: frame " + std::to_string(t) +
                       " has inconsistent body count");
    for (int m = 0; m < m_in; ++m) {
      const json& body = frame.at(m);
      if (!body.is_array() || static_cast<int>(body.size()) != V)
        throw ParseError("sequence JSON: frame " + std::to_string(t) + " body " +
                         std::to_string(m) + " has inconsistent joint count");
      for (int v = 0; v < V; ++v) {
        const json& joint = body.at(v);
        if (!joint.is_array() || static_cast<int>(joint.size()) != C)
          throw ParseError("sequence JSON: frame " + std::to_string(t) + " joint " +
                           std::to_string(v) + " has inconsistent coordinate count");
        for (int c = 0; c < C; ++c) {
          const json& val = joint.at(c);
          if (!val.is_number())
            throw ParseError("sequence JSON: non-numeric coordinate at frame " +
                             std::to_string(t) + " joint " + std::to_string(v));
          const double d = val.get<double>();
          if (!std::isfinite(d))
            throw ParseError("sequence JSON: non-finite coordinate at frame " +
                             std::to_string(t) + " joint " + std::to_string(v));
          seq.at(t, m, v, c) = d;
        }
      }
    }
  }
  return seq;
}

std::string write_json_sequence(const SkeletonSequence& seq) {
  seq.validate();
  json frames = json::array();
  for (int t = 0; t < seq.frames; ++t) {
    json frame = json::array();
    for (int m = 0; m < seq.bodies; ++m) {
      json body = json::array();
      for (int v = 0; v < seq.joints; ++v) {
        json joint = json::array();
        for (int c = 0; c < seq.channels; ++c) joint.push_back(seq.at(t, m, v, c));
        body.push_back(std::move(joint));
      }
      frame.push_back(std::move(body));
    }
    frames.push_back(std::move(frame));
  }
  json doc = {
      {"format", "skeltk-sequence"},
      {"version", 1},
      {"label", seq.label},
      {"subject_id", seq.subject_id},
      {"camera_id", seq.camera_id},
      {"setup_id", seq.setup_id},
      {"source_id", seq.source_id},
      {"frames", std::move(frames)},
  };
  return doc.dump();
}

SkeletonSequence load_sequence_file(const std::filesystem::path& path) {
  if (path.extension() == ".skeleton") return load_ntu_skeleton_file(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open sequence file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  SkeletonSequence seq = load_json_sequence(buf.str());
  if (seq.source_id.empty()) seq.source_id = path.stem().string();
  return seq;
}

void save_sequence_file(const SkeletonSequence& seq, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path.string());
  out << write_json_sequence(seq);
  out << "\n";
}

}  // namespace skeltk
