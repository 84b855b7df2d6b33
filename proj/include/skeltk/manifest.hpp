#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace skeltk {

enum class SplitRule { cross_subject, cross_view, cross_setup };

std::string to_string(SplitRule rule);
SplitRule split_rule_from_string(const std::string& s);

// One dataset entry: where the sequence lives plus the metadata the split
// rules key on. The label is duplicated here so splits and class counts can
// be computed without touching the sequence files.
struct ManifestEntry {
  std::string path;
  int label = 0;
  int subject_id = 0;
  int camera_id = 0;
  int setup_id = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> sequences;
  int num_classes = 0;
  SplitRule split_rule = SplitRule::cross_subject;
  std::set<int> train_ids;
  std::set<int> test_ids;

  // num_classes >= 1, labels in range, train/test id sets disjoint.
  void validate() const;
};

// Partitions entries by the manifest's split rule. Returns index lists into
// manifest.sequences (train, test). An entry whose id is in neither set is an
// error naming the id; the id sets must be disjoint.
std::pair<std::vector<int>, std::vector<int>> split_dataset(const DatasetManifest& m);

// Manifest JSON: {"format": "skeltk-manifest", "version": 1, "num_classes",
// "split_rule", "train_ids", "test_ids", "sequences": [{"path", "label",
// "subject_id", "camera_id", "setup_id"}, ...]}. Relative sequence paths are
// resolved against the manifest file's directory on load.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

}  // namespace skeltk
