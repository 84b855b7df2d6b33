#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skeltk/manifest.hpp"
#include "skeltk/models.hpp"
#include "skeltk/nn/tensor.hpp"
#include "skeltk/sequence.hpp"
#include "skeltk/taylor.hpp"

namespace skeltk {

enum class ScheduleKind { step, milestones };

std::string to_string(ScheduleKind kind);
ScheduleKind schedule_kind_from_string(const std::string& text);

// Piecewise-constant decay: either every `step_epochs` epochs or at the
// listed milestone epochs.
struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::step;
  int step_epochs = 10;
  std::vector<int> milestones;
  double factor = 0.1;
};

struct TrainConfig {
  double base_lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  ScheduleConfig schedule;
  int total_epochs = 80;
  int batch_size = 32;
  std::uint64_t seed = 0;
  // Stop once train top-1 (percent) reaches this value; negative disables.
  double stop_at_train_accuracy = -1.0;

  void validate() const;
};

double lr_at(const TrainConfig& cfg, int epoch);

// Fields present in the JSON overwrite the base; everything else keeps the
// base value. The result is validated.
TrainConfig train_config_from_json(const std::string& text,
                                   const TrainConfig& base = TrainConfig());
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig load_train_config(const std::string& path,
                              const TrainConfig& base = TrainConfig());

// Fixed-size numeric samples ready for batching. Each sample is a
// (channels, frames, joints, bodies) block in row-major order.
struct Dataset {
  int num_classes = 0;
  int channels = 0;
  int frames = 0;
  int joints = 0;
  int bodies = 0;
  std::vector<std::vector<double>> samples;
  std::vector<int> labels;

  size_t size() const { return samples.size(); }
};

// Applies the optional displacement transform first (it shortens the
// sequence), then resizing/centering, and packs the result.
Dataset make_dataset(const std::vector<SkeletonSequence>& sequences,
                     int num_classes, const PreprocessConfig& pre,
                     const TaylorConfig* taylor = nullptr);

// Stacks the selected samples into a constant (N, C, T, V, M) input tensor.
nn::Tensor make_batch(const Dataset& data, const std::vector<int>& indices);

struct DatasetSplits {
  Dataset train;
  Dataset test;
};

DatasetSplits dataset_from_manifest(const DatasetManifest& manifest,
                                    const PreprocessConfig& pre,
                                    const TaylorConfig* taylor = nullptr);

struct EpochStats {
  double loss = 0.0;
  double top1 = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int stopped_early_at = -1;
};

// Momentum SGD over shuffled mini-batches; deterministic for a fixed seed.
// Partial final batches are kept. Loss and top-1 are accumulated from the
// training-mode forward passes.
TrainHistory train_model(Model& model, const Dataset& data,
                         const TrainConfig& cfg);

void write_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace skeltk
