#include "skeltk/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skeltk/error.hpp"

namespace skeltk {

using nlohmann::json;

std::string to_string(SplitRule rule) {
  switch (rule) {
    case SplitRule::cross_subject: return "cross_subject";
    case SplitRule::cross_view: return "cross_view";
    case SplitRule::cross_setup: return "cross_setup";
  }
  throw ValidationError("manifest: unknown split rule value");
}

SplitRule split_rule_from_string(const std::string& s) {
  if (s == "cross_subject") return SplitRule::cross_subject;
  if (s == "cross_view") return SplitRule::cross_view;
  if (s == "cross_setup") return SplitRule::cross_setup;
  throw ValidationError("manifest: unknown split rule \"" + s + "\"");
}

void DatasetManifest::validate() const {
  if (num_classes < 1)
    throw ValidationError("manifest: num_classes must be >= 1");
  for (size_t i = 0; i < sequences.size(); ++i) {
    const ManifestEntry& e = sequences[i];
    if (e.label < 0 || e.label >= num_classes)
      throw ValidationError("manifest: entry " + std::to_string(i) + " label " +
                            std::to_string(e.label) + " outside [0, " +
                            std::to_string(num_classes) + ")");
  }
  for (int id : train_ids) {
    if (test_ids.count(id))
      throw ValidationError("manifest: id " + std::to_string(id) +
                            " appears in both train_ids and test_ids");
  }
}

namespace {

int split_key(const ManifestEntry& e, SplitRule rule) {
  switch (rule) {
    case SplitRule::cross_subject: return e.subject_id;
    case SplitRule::cross_view: return e.camera_id;
    case SplitRule::cross_setup: return e.setup_id;
  }
  throw ValidationError("manifest: unknown split rule value");
}

}  // namespace

std::pair<std::vector<int>, std::vector<int>> split_dataset(const DatasetManifest& m) {
  m.validate();
  std::vector<int> train, test;
  for (size_t i = 0; i < m.sequences.size(); ++i) {
    const int id = split_key(m.sequences[i], m.split_rule);
    const bool in_train = m.train_ids.count(id) > 0;
    const bool in_test = m.test_ids.count(id) > 0;
    if (in_train)
      train.push_back(static_cast<int>(i));
    else if (in_test)
      test.push_back(static_cast<int>(i));
    else
      throw ValidationError("manifest: " + to_string(m.split_rule) + " id " +
                            std::to_string(id) +
                            " is in neither train_ids nor test_ids");
  }
  return {std::move(train), std::move(test)};
}

namespace {

json ids_to_json(const std::set<int>& ids) {
  json arr = json::array();
  for (int id : ids) arr.push_back(id);
  return arr;
}

std::set<int> ids_from_json(const json& doc, const char* field) {
  if (!doc.contains(field) || !doc.at(field).is_array())
    throw ParseError(std::string("manifest JSON: missing array field \"") + field +
                     "\"");
  std::set<int> out;
  for (const json& v : doc.at(field)) {
    if (!v.is_number_integer())
      throw ParseError(std::string("manifest JSON: field \"") + field +
                       "\" must contain integers");
    out.insert(v.get<int>());
  }
  return out;
}

int entry_int(const json& e, const char* field, size_t idx) {
  if (!e.contains(field) || !e.at(field).is_number_integer())
    throw ParseError("manifest JSON: sequence " + std::to_string(idx) +
                     " missing integer field \"" + field + "\"");
  return e.at(field).get<int>();
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open manifest: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("manifest JSON: document must be an object");
  if (!doc.contains("num_classes") || !doc.at("num_classes").is_number_integer())
    throw ParseError("manifest JSON: missing integer field \"num_classes\"");
  if (!doc.contains("split_rule") || !doc.at("split_rule").is_string())
    throw ParseError("manifest JSON: missing string field \"split_rule\"");

  DatasetManifest m;
  m.num_classes = doc.at("num_classes").get<int>();
  m.split_rule = split_rule_from_string(doc.at("split_rule").get<std::string>());
  m.train_ids = ids_from_json(doc, "train_ids");
  m.test_ids = ids_from_json(doc, "test_ids");

  if (!doc.contains("sequences") || !doc.at("sequences").is_array())
    throw ParseError("manifest JSON: missing array field \"sequences\"");
  const std::filesystem::path base = path.parent_path();
  size_t idx = 0;
  for (const json& e : doc.at("sequences")) {
    if (!e.is_object())
      throw ParseError("manifest JSON: sequence " + std::to_string(idx) +
                       " must be an object");
    if (!e.contains("path") || !e.at("path").is_string())
      throw ParseError("manifest JSON: sequence " + std::to_string(idx) +
                       " missing string field \"path\"");
    ManifestEntry entry;
    std::filesystem::path p = e.at("path").get<std::string>();
    entry.path = (p.is_absolute() ? p : base / p).string();
    entry.label = entry_int(e, "label", idx);
    entry.subject_id = entry_int(e, "subject_id", idx);
    entry.camera_id = entry_int(e, "camera_id", idx);
    entry.setup_id = entry_int(e, "setup_id", idx);
    m.sequences.push_back(std::move(entry));
    ++idx;
  }
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  m.validate();
  json seqs = json::array();
  for (const ManifestEntry& e : m.sequences) {
    seqs.push_back({{"path", e.path},
                    {"label", e.label},
                    {"subject_id", e.subject_id},
                    {"camera_id", e.camera_id},
                    {"setup_id", e.setup_id}});
  }
  json doc = {
      {"format", "skeltk-manifest"},
      {"version", 1},
      {"num_classes", m.num_classes},
      {"split_rule", to_string(m.split_rule)},
      {"train_ids", ids_to_json(m.train_ids)},
      {"test_ids", ids_to_json(m.test_ids)},
      {"sequences", std::move(seqs)},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace skeltk
