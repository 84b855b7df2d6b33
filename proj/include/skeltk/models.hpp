#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "skeltk/nn/checkpoint.hpp"
#include "skeltk/nn/ops.hpp"
#include "skeltk/nn/tensor.hpp"
#include "skeltk/topology.hpp"

namespace skeltk {

// Insertion-ordered named parameter collection; every tensor requires grad.
class ParameterSet {
 public:
  nn::Tensor add(const std::string& name, nn::Tensor t);
  nn::Tensor get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, nn::Tensor>>& items() const {
    return items_;
  }

 private:
  std::vector<std::pair<std::string, nn::Tensor>> items_;
};

std::int64_t count_parameters(const ParameterSet& params);

// Records named activation shapes during a forward pass, for shape tests.
struct ShapeTrace {
  std::vector<std::pair<std::string, nn::Shape>> entries;
  void record(const std::string& name, const nn::Shape& shape) {
    entries.emplace_back(name, shape);
  }
  const nn::Shape* find(const std::string& name) const;
};

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
  ShapeTrace* trace = nullptr;
};

// Both models consume a leaf tensor of shape (N, C, T, V, M) and emit logits
// (N, num_classes); the M person streams share parameters and their logits
// are averaged.
class Model {
 public:
  virtual ~Model() = default;
  virtual nn::Tensor forward(const nn::Tensor& input,
                             const ForwardOptions& opts) = 0;
  virtual ParameterSet& parameters() = 0;
  virtual const ParameterSet& parameters() const = 0;
  virtual std::string kind() const = 0;
  virtual std::string config_json() const = 0;
  virtual int num_classes() const = 0;

  virtual std::vector<nn::NamedArray> buffers() const = 0;
  virtual void load_buffers(const std::vector<nn::NamedArray>& buffers) = 0;

  nn::CheckpointData to_checkpoint() const;
  void load_params(const std::vector<nn::NamedArray>& params);
};

struct STGCNConfig {
  std::vector<int> layer_channels = {64, 64, 64, 128, 128, 128, 256, 256, 256};
  int temporal_kernel = 9;
  std::set<int> stride_layers = {4, 7};  // 1-based layer indices
  double dropout_p = 0.5;
  bool residual = true;
  int in_channels = 3;
  int num_classes = 0;

  void validate() const;
  std::string to_json() const;
  static STGCNConfig from_json(const std::string& text);
};

class STGCNModel : public Model {
 public:
  STGCNModel(const STGCNConfig& cfg, const SkeletalGraph& graph,
             std::uint64_t init_seed);

  nn::Tensor forward(const nn::Tensor& input, const ForwardOptions& opts) override;
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }
  std::string kind() const override { return "stgcn"; }
  std::string config_json() const override { return cfg_.to_json(); }
  int num_classes() const override { return cfg_.num_classes; }
  std::vector<nn::NamedArray> buffers() const override;
  void load_buffers(const std::vector<nn::NamedArray>& buffers) override;

  const STGCNConfig& config() const { return cfg_; }

 private:
  STGCNConfig cfg_;
  std::vector<Matrix> partitions_;
  ParameterSet params_;
  nn::BatchNormState data_bn_;
  std::vector<nn::BatchNormState> layer_bn_;
};

struct HyperformerConfig {
  int num_layers = 10;
  int hidden_channels = 216;
  int num_heads = 6;
  int temporal_kernel = 9;
  int target_frames = 64;
  int in_channels = 3;
  int num_classes = 0;

  void validate() const;
  std::string to_json() const;
  static HyperformerConfig from_json(const std::string& text);
};

class HyperformerModel : public Model {
 public:
  HyperformerModel(const HyperformerConfig& cfg, const Hypergraph& hg,
                   std::uint64_t init_seed);

  nn::Tensor forward(const nn::Tensor& input, const ForwardOptions& opts) override;
  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }
  std::string kind() const override { return "hyperformer"; }
  std::string config_json() const override { return cfg_.to_json(); }
  int num_classes() const override { return cfg_.num_classes; }
  std::vector<nn::NamedArray> buffers() const override;
  void load_buffers(const std::vector<nn::NamedArray>& buffers) override;

  const HyperformerConfig& config() const { return cfg_; }

 private:
  HyperformerConfig cfg_;
  Matrix mix_;  // hypergraph aggregation operator
  std::vector<std::uint8_t> same_edge_;
  ParameterSet params_;
  std::vector<nn::BatchNormState> layer_bn_;
};

// Rebuilds a model (including running statistics) from a checkpoint. The
// graph/hypergraph are rebuilt from the standard 25-joint topology.
std::unique_ptr<Model> model_from_checkpoint(const nn::CheckpointData& data);

}  // namespace skeltk
