#include "skeltk/nn/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "skeltk/error.hpp"

namespace skeltk::nn {

using nlohmann::json;

namespace {

json arrays_to_json(const std::vector<NamedArray>& arrays) {
  json out = json::array();
  for (const NamedArray& a : arrays) {
    json shape = json::array();
    for (int d : a.shape) shape.push_back(d);
    json values = json::array();
    for (double v : a.values) values.push_back(v);
    out.push_back({{"name", a.name}, {"shape", shape}, {"values", values}});
  }
  return out;
}

std::vector<NamedArray> arrays_from_json(const json& doc, const char* field) {
  if (!doc.contains(field) || !doc.at(field).is_array())
    throw ParseError(std::string("checkpoint: missing array field \"") + field +
                     "\"");
  std::vector<NamedArray> out;
  for (const json& e : doc.at(field)) {
    NamedArray a;
    if (!e.contains("name") || !e.at("name").is_string())
      throw ParseError("checkpoint: entry missing \"name\"");
    a.name = e.at("name").get<std::string>();
    if (!e.contains("shape") || !e.at("shape").is_array())
      throw ParseError("checkpoint: \"" + a.name + "\" missing \"shape\"");
    std::int64_t expected = 1;
    for (const json& d : e.at("shape")) {
      if (!d.is_number_integer())
        throw ParseError("checkpoint: \"" + a.name + "\" has non-integer shape");
      a.shape.push_back(d.get<int>());
      expected *= a.shape.back();
    }
    if (!e.contains("values") || !e.at("values").is_array())
      throw ParseError("checkpoint: \"" + a.name + "\" missing \"values\"");
    for (const json& v : e.at("values")) {
      if (!v.is_number())
        throw ParseError("checkpoint: \"" + a.name + "\" has non-numeric value");
      const double d = v.get<double>();
      if (!std::isfinite(d))
        throw ParseError("checkpoint: \"" + a.name + "\" has non-finite value");
      a.values.push_back(d);
    }
    if (static_cast<std::int64_t>(a.values.size()) != expected)
      throw ParseError("checkpoint: \"" + a.name + "\" value count " +
                       std::to_string(a.values.size()) +
                       " does not fill its shape");
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace

void save_checkpoint(const CheckpointData& data,
                     const std::filesystem::path& path) {
  json config = json::object();
  if (!data.config_json.empty()) {
    try {
      config = json::parse(data.config_json);
    } catch (const json::exception& e) {
      throw ValidationError(std::string("checkpoint: config is not valid JSON: ") +
                            e.what());
    }
  }
  json doc = {
      {"format", "skeltk-checkpoint"},
      {"version", data.version},
      {"model", data.model_kind},
      {"config", std::move(config)},
      {"params", arrays_to_json(data.params)},
      {"buffers", arrays_to_json(data.buffers)},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path.string());
  out << doc.dump() << "\n";
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("format") ||
      doc.at("format") != "skeltk-checkpoint")
    throw ParseError("checkpoint: not a skeltk-checkpoint document");
  if (!doc.contains("version") || !doc.at("version").is_number_integer())
    throw ParseError("checkpoint: missing integer field \"version\"");

  CheckpointData data;
  data.version = doc.at("version").get<int>();
  if (data.version != 1)
    throw ParseError("checkpoint: unsupported version " +
                     std::to_string(data.version));
  if (!doc.contains("model") || !doc.at("model").is_string())
    throw ParseError("checkpoint: missing string field \"model\"");
  data.model_kind = doc.at("model").get<std::string>();
  data.config_json = doc.contains("config") ? doc.at("config").dump() : "{}";
  data.params = arrays_from_json(doc, "params");
  data.buffers = arrays_from_json(doc, "buffers");
  return data;
}

}  // namespace skeltk::nn
