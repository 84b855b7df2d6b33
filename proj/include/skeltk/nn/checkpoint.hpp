#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace skeltk::nn {

struct NamedArray {
  std::string name;
  std::vector<int> shape;
  std::vector<double> values;
};

// On-disk parameter snapshot: a versioned JSON document holding the model
// kind, its config (as a JSON object), all named parameters, and the
// non-learned buffers (running batch-norm statistics).
struct CheckpointData {
  int version = 1;
  std::string model_kind;
  std::string config_json;  // serialized config object
  std::vector<NamedArray> params;
  std::vector<NamedArray> buffers;
};

void save_checkpoint(const CheckpointData& data,
                     const std::filesystem::path& path);
CheckpointData load_checkpoint(const std::filesystem::path& path);

}  // namespace skeltk::nn
