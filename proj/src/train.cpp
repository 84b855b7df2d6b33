#include "skeltk/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "skeltk/error.hpp"
#include "skeltk/nn/ops.hpp"
#include "skeltk/rng.hpp"
#include "skeltk/sequence_json.hpp"

namespace skeltk {

using nlohmann::json;
using nn::Tensor;

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::step ? "step" : "milestones";
}

ScheduleKind schedule_kind_from_string(const std::string& text) {
  if (text == "step") return ScheduleKind::step;
  if (text == "milestones") return ScheduleKind::milestones;
  throw ValidationError("unknown schedule kind \"" + text + "\"");
}

void TrainConfig::validate() const {
  if (base_lr <= 0.0)
    throw ValidationError("train config: base_lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ValidationError("train config: momentum must be in [0, 1)");
  if (weight_decay < 0.0)
    throw ValidationError("train config: weight_decay must be >= 0");
  if (total_epochs < 0)
    throw ValidationError("train config: total_epochs must be >= 0");
  if (batch_size < 1)
    throw ValidationError("train config: batch_size must be >= 1");
  if (schedule.factor <= 0.0 || schedule.factor >= 1.0)
    throw ValidationError("train config: schedule factor must be in (0, 1)");
  if (schedule.kind == ScheduleKind::step) {
    if (schedule.step_epochs < 1)
      throw ValidationError("train config: step_epochs must be >= 1");
  } else {
    int prev = -1;
    for (int m : schedule.milestones) {
      if (m <= prev)
        throw ValidationError("train config: milestones must be strictly increasing");
      if (m < 0 || m >= total_epochs)
        throw ValidationError("train config: milestone " + std::to_string(m) +
                              " outside [0, " + std::to_string(total_epochs) + ")");
      prev = m;
    }
  }
  if (stop_at_train_accuracy > 100.0)
    throw ValidationError("train config: stop_at_train_accuracy must be <= 100");
}

double lr_at(const TrainConfig& cfg, int epoch) {
  if (epoch < 0 || epoch >= cfg.total_epochs)
    throw ValidationError("lr_at: epoch " + std::to_string(epoch) +
                          " outside [0, " + std::to_string(cfg.total_epochs) +
                          ")");
  int decays = 0;
  if (cfg.schedule.kind == ScheduleKind::step) {
    decays = epoch / cfg.schedule.step_epochs;
  } else {
    for (int m : cfg.schedule.milestones)
      if (m <= epoch) ++decays;
  }
  return cfg.base_lr * std::pow(cfg.schedule.factor, decays);
}

TrainConfig train_config_from_json(const std::string& text,
                                   const TrainConfig& base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  TrainConfig cfg = base;
  try {
    if (doc.contains("base_lr")) cfg.base_lr = doc.at("base_lr").get<double>();
    if (doc.contains("momentum")) cfg.momentum = doc.at("momentum").get<double>();
    if (doc.contains("weight_decay"))
      cfg.weight_decay = doc.at("weight_decay").get<double>();
    if (doc.contains("total_epochs"))
      cfg.total_epochs = doc.at("total_epochs").get<int>();
    if (doc.contains("batch_size"))
      cfg.batch_size = doc.at("batch_size").get<int>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("stop_at_train_accuracy"))
      cfg.stop_at_train_accuracy = doc.at("stop_at_train_accuracy").get<double>();
    if (doc.contains("schedule")) {
      const json& s = doc.at("schedule");
      if (s.contains("kind"))
        cfg.schedule.kind = schedule_kind_from_string(s.at("kind").get<std::string>());
      if (s.contains("step_epochs"))
        cfg.schedule.step_epochs = s.at("step_epochs").get<int>();
      if (s.contains("milestones"))
        cfg.schedule.milestones = s.at("milestones").get<std::vector<int>>();
      if (s.contains("factor")) cfg.schedule.factor = s.at("factor").get<double>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string train_config_to_json(const TrainConfig& cfg) {
  json schedule = {{"kind", to_string(cfg.schedule.kind)},
                   {"factor", cfg.schedule.factor}};
  if (cfg.schedule.kind == ScheduleKind::step)
    schedule["step_epochs"] = cfg.schedule.step_epochs;
  else
    schedule["milestones"] = cfg.schedule.milestones;
  json doc = {
      {"base_lr", cfg.base_lr},
      {"momentum", cfg.momentum},
      {"weight_decay", cfg.weight_decay},
      {"schedule", schedule},
      {"total_epochs", cfg.total_epochs},
      {"batch_size", cfg.batch_size},
      {"seed", cfg.seed},
      {"stop_at_train_accuracy", cfg.stop_at_train_accuracy},
  };
  return doc.dump(2);
}

TrainConfig load_train_config(const std::string& path, const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open train config \"" + path + "\"");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return train_config_from_json(text, base);
}

// ---------------------------------------------------------------------------

Dataset make_dataset(const std::vector<SkeletonSequence>& sequences,
                     int num_classes, const PreprocessConfig& pre,
                     const TaylorConfig* taylor) {
  if (num_classes < 1)
    throw ValidationError("make_dataset: num_classes must be >= 1");
  Dataset out;
  out.num_classes = num_classes;
  for (size_t i = 0; i < sequences.size(); ++i) {
    SkeletonSequence seq = sequences[i];
    seq.validate(num_classes);
    if (taylor) seq = taylor_transform(seq, *taylor);
    seq = preprocess(seq, pre);
    if (out.samples.empty()) {
      out.channels = seq.channels;
      out.frames = seq.frames;
      out.joints = seq.joints;
      out.bodies = seq.bodies;
    } else if (seq.channels != out.channels || seq.frames != out.frames ||
               seq.joints != out.joints || seq.bodies != out.bodies) {
      throw ValidationError("make_dataset: sequence " + std::to_string(i) +
                            " dimensions differ from the first sequence");
    }
    std::vector<double> block(
        static_cast<size_t>(out.channels) * out.frames * out.joints * out.bodies);
    size_t w = 0;
    for (int c = 0; c < out.channels; ++c)
      for (int t = 0; t < out.frames; ++t)
        for (int v = 0; v < out.joints; ++v)
          for (int m = 0; m < out.bodies; ++m) block[w++] = seq.at(t, m, v, c);
    out.samples.push_back(std::move(block));
    out.labels.push_back(seq.label);
  }
  return out;
}

nn::Tensor make_batch(const Dataset& data, const std::vector<int>& indices) {
  if (indices.empty()) throw ValidationError("make_batch: empty index list");
  const size_t block = static_cast<size_t>(data.channels) * data.frames *
                       data.joints * data.bodies;
  std::vector<double> values;
  values.reserve(indices.size() * block);
  for (int idx : indices) {
    if (idx < 0 || static_cast<size_t>(idx) >= data.size())
      throw ValidationError("make_batch: index " + std::to_string(idx) +
                            " out of range");
    const std::vector<double>& s = data.samples[idx];
    values.insert(values.end(), s.begin(), s.end());
  }
  return Tensor::from_values({static_cast<int>(indices.size()), data.channels,
                              data.frames, data.joints, data.bodies},
                             std::move(values), false);
}

DatasetSplits dataset_from_manifest(const DatasetManifest& manifest,
                                    const PreprocessConfig& pre,
                                    const TaylorConfig* taylor) {
  manifest.validate();
  auto [train_idx, test_idx] = split_dataset(manifest);
  auto load_split = [&](const std::vector<int>& idx) {
    std::vector<SkeletonSequence> seqs;
    seqs.reserve(idx.size());
    for (int i : idx) {
      const ManifestEntry& e = manifest.sequences[i];
      SkeletonSequence seq = load_sequence_file(e.path);
      seq.label = e.label;
      seq.subject_id = e.subject_id;
      seq.camera_id = e.camera_id;
      seq.setup_id = e.setup_id;
      seqs.push_back(std::move(seq));
    }
    return make_dataset(seqs, manifest.num_classes, pre, taylor);
  };
  DatasetSplits splits;
  splits.train = load_split(train_idx);
  splits.test = load_split(test_idx);
  return splits;
}

// ---------------------------------------------------------------------------

namespace {

int argmax_row(const std::vector<double>& values, int row, int width) {
  int best = 0;
  double best_v = values[static_cast<size_t>(row) * width];
  for (int k = 1; k < width; ++k) {
    double v = values[static_cast<size_t>(row) * width + k];
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  return best;
}

}  // namespace

TrainHistory train_model(Model& model, const Dataset& data,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw ValidationError("train: dataset is empty");
  if (data.num_classes != model.num_classes())
    throw ValidationError("train: dataset has " +
                          std::to_string(data.num_classes) +
                          " classes but the model expects " +
                          std::to_string(model.num_classes()));

  auto& params = model.parameters().items();
  std::vector<std::vector<double>> velocity(params.size());
  for (size_t i = 0; i < params.size(); ++i)
    velocity[i].assign(static_cast<size_t>(params[i].second.numel()), 0.0);

  const int n = static_cast<int>(data.size());
  Rng root(cfg.seed);
  TrainHistory history;

  for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    const double lr = lr_at(cfg, epoch);
    Rng epoch_rng = root.fork(static_cast<std::uint64_t>(epoch));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = epoch_rng.fork(0);
    shuffle_rng.shuffle(order);
    Rng dropout_rng = epoch_rng.fork(1);

    double loss_sum = 0.0;
    std::int64_t correct = 0;
    std::int64_t seen = 0;
    int batch_index = 0;
    for (int start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const int stop = std::min(n, start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + stop);
      std::vector<int> labels(batch.size());
      for (size_t i = 0; i < batch.size(); ++i) labels[i] = data.labels[batch[i]];

      Tensor input = make_batch(data, batch);
      ForwardOptions opts;
      opts.training = true;
      opts.dropout_seed = dropout_rng.fork(static_cast<std::uint64_t>(batch_index))
                              .next_u64();
      Tensor logits = model.forward(input, opts);
      Tensor loss = nn::cross_entropy(logits, labels);
      const double loss_value = loss.scalar();
      if (!std::isfinite(loss_value))
        throw DivergenceError("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch) + " batch " +
                              std::to_string(batch_index));

      const int batch_n = static_cast<int>(batch.size());
      for (int i = 0; i < batch_n; ++i)
        if (argmax_row(logits.values(), i, data.num_classes) == labels[i])
          ++correct;
      loss_sum += loss_value * batch_n;
      seen += batch_n;

      for (size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].second;
        p.clear_grad();
      }
      nn::backward(loss);

      for (size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].second;
        std::vector<double>& value = p.values();
        std::vector<double>& vel = velocity[i];
        const std::vector<double>* grad = p.has_grad() ? &p.grad() : nullptr;
        for (size_t j = 0; j < value.size(); ++j) {
          double g = grad ? (*grad)[j] : 0.0;
          if (cfg.weight_decay != 0.0) g += cfg.weight_decay * value[j];
          vel[j] = cfg.momentum * vel[j] + g;
          value[j] -= lr * vel[j];
        }
      }
    }

    EpochStats stats;
    stats.loss = loss_sum / static_cast<double>(seen);
    stats.top1 = 100.0 * static_cast<double>(correct) / static_cast<double>(seen);
    stats.lr = lr;
    history.epochs.push_back(stats);
    if (cfg.stop_at_train_accuracy >= 0.0 &&
        stats.top1 >= cfg.stop_at_train_accuracy) {
      history.stopped_early_at = epoch;
      break;
    }
  }
  return history;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write history to \"" + path + "\"");
  out << "epoch,lr,loss,train_top1\n";
  for (size_t e = 0; e < history.epochs.size(); ++e) {
    const EpochStats& s = history.epochs[e];
    out << e << ',' << s.lr << ',' << s.loss << ',' << s.top1 << '\n';
  }
}

}  // namespace skeltk
