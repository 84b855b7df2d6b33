#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "skeltk/error.hpp"
#include "skeltk/models.hpp"
#include "skeltk/nn/ops.hpp"
#include "skeltk/rng.hpp"
#include "skeltk/synth.hpp"
#include "skeltk/train.hpp"

using namespace skeltk;
using nn::Tensor;

namespace {

STGCNConfig tiny_stgcn(int num_classes) {
  STGCNConfig cfg;
  cfg.layer_channels = {6, 8};
  cfg.stride_layers = {2};
  cfg.temporal_kernel = 3;
  cfg.dropout_p = 0.0;
  cfg.num_classes = num_classes;
  return cfg;
}

Dataset tiny_dataset(int classes, int per_class, int frames, std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.num_classes = classes;
  spec.sequences_per_class = per_class;
  spec.frames = frames;
  auto seqs = synth_generate(spec);
  PreprocessConfig pre;
  pre.target_frames = frames;
  return make_dataset(seqs, classes, pre);
}

}  // namespace

TEST_CASE("step schedule decays every step_epochs") {
  TrainConfig cfg;  // base 0.01, step 10, factor 0.1, 80 epochs
  CHECK(lr_at(cfg, 0) == doctest::Approx(0.01));
  CHECK(lr_at(cfg, 9) == doctest::Approx(0.01));
  CHECK(lr_at(cfg, 10) == doctest::Approx(0.001));
  CHECK(lr_at(cfg, 19) == doctest::Approx(0.001));
  CHECK(lr_at(cfg, 20) == doctest::Approx(0.0001));
  CHECK_THROWS_AS(lr_at(cfg, -1), ValidationError);
  CHECK_THROWS_AS(lr_at(cfg, 80), ValidationError);
}

TEST_CASE("milestone schedule decays at the listed epochs") {
  TrainConfig cfg;
  cfg.base_lr = 0.025;
  cfg.total_epochs = 140;
  cfg.schedule.kind = ScheduleKind::milestones;
  cfg.schedule.milestones = {110, 120};
  CHECK(lr_at(cfg, 0) == doctest::Approx(0.025));
  CHECK(lr_at(cfg, 109) == doctest::Approx(0.025));
  CHECK(lr_at(cfg, 110) == doctest::Approx(0.0025));
  CHECK(lr_at(cfg, 119) == doctest::Approx(0.0025));
  CHECK(lr_at(cfg, 120) == doctest::Approx(0.00025));
  CHECK(lr_at(cfg, 139) == doctest::Approx(0.00025));
}

TEST_CASE("config validation pins the schedule contract") {
  TrainConfig cfg;
  cfg.schedule.factor = 1.0;  // no-op decay is a config bug
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.schedule.factor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.schedule.factor = 0.1;
  CHECK_NOTHROW(cfg.validate());

  cfg.schedule.kind = ScheduleKind::milestones;
  cfg.schedule.milestones = {20, 10};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.schedule.milestones = {10, 10};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.schedule.milestones = {10, 80};  // >= total_epochs
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.schedule.milestones = {10, 20};
  CHECK_NOTHROW(cfg.validate());

  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.momentum = 0.9;
  cfg.stop_at_train_accuracy = 101.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("train config JSON overlays onto a base") {
  TrainConfig base;
  base.base_lr = 0.025;
  base.total_epochs = 140;
  base.schedule.kind = ScheduleKind::milestones;
  base.schedule.milestones = {110, 120};

  auto cfg = train_config_from_json(R"({"batch_size": 64})", base);
  CHECK(cfg.batch_size == 64);
  CHECK(cfg.base_lr == 0.025);            // kept from the base
  CHECK(cfg.total_epochs == 140);
  CHECK(cfg.schedule.milestones == std::vector<int>{110, 120});

  auto round = train_config_from_json(train_config_to_json(cfg));
  CHECK(round.base_lr == cfg.base_lr);
  CHECK(round.batch_size == cfg.batch_size);
  CHECK(round.schedule.kind == cfg.schedule.kind);
  CHECK(round.schedule.milestones == cfg.schedule.milestones);

  CHECK_THROWS_AS(train_config_from_json("{bad"), ParseError);
  CHECK_THROWS_AS(train_config_from_json(R"({"base_lr": -1})"), ValidationError);
}

TEST_CASE("the update rule drives a quadratic to its minimum") {
  // loss(p) = (p - 3)^2, lr 0.1, no momentum: p_k -> 3 geometrically.
  Tensor p = Tensor::from_values({1}, {0.0}, true);
  Tensor target = Tensor::from_values({1}, {3.0}, false);
  const double lr = 0.1;
  for (int step = 0; step < 100; ++step) {
    p.clear_grad();
    Tensor d = nn::sub(p, target);
    Tensor loss = nn::sum_all(nn::mul(d, d));
    nn::backward(loss);
    p.values()[0] -= lr * p.grad()[0];
  }
  CHECK(std::abs(p.values()[0] - 3.0) < 1e-3);

  // with momentum the same fixed point is reached
  Tensor q = Tensor::from_values({1}, {0.0}, true);
  double velocity = 0.0;
  for (int step = 0; step < 300; ++step) {
    q.clear_grad();
    Tensor d = nn::sub(q, target);
    Tensor loss = nn::sum_all(nn::mul(d, d));
    nn::backward(loss);
    velocity = 0.9 * velocity + q.grad()[0];
    q.values()[0] -= lr * velocity;
  }
  CHECK(std::abs(q.values()[0] - 3.0) < 1e-3);
}

TEST_CASE("train_model matches a hand-rolled optimizer step for step") {
  auto data = tiny_dataset(2, 2, 8, 5);
  REQUIRE(data.size() == 4);

  TrainConfig cfg;
  cfg.base_lr = 0.05;
  cfg.momentum = 0.5;
  cfg.weight_decay = 0.01;
  cfg.total_epochs = 2;
  cfg.batch_size = 3;  // uneven split: batches of 3 and 1
  cfg.seed = 71;

  auto mcfg = tiny_stgcn(2);
  STGCNModel trained(mcfg, build_ntu_graph(), 41);
  STGCNModel manual(mcfg, build_ntu_graph(), 41);

  auto history = train_model(trained, data, cfg);
  REQUIRE(history.epochs.size() == 2);

  // replay the documented seeding chain and update equations by hand
  auto& params = manual.parameters().items();
  std::vector<std::vector<double>> vel(params.size());
  for (size_t i = 0; i < params.size(); ++i)
    vel[i].assign(static_cast<size_t>(params[i].second.numel()), 0.0);

  Rng root(cfg.seed);
  for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
    const double lr = lr_at(cfg, epoch);
    Rng epoch_rng = root.fork(static_cast<std::uint64_t>(epoch));
    std::vector<int> order(4);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = epoch_rng.fork(0);
    shuffle_rng.shuffle(order);
    Rng dropout_rng = epoch_rng.fork(1);

    int batch_index = 0;
    for (int start = 0; start < 4; start += cfg.batch_size, ++batch_index) {
      const int stop = std::min(4, start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + stop);
      std::vector<int> labels;
      for (int idx : batch) labels.push_back(data.labels[static_cast<size_t>(idx)]);
      ForwardOptions opts;
      opts.training = true;
      opts.dropout_seed =
          dropout_rng.fork(static_cast<std::uint64_t>(batch_index)).next_u64();
      Tensor loss =
          nn::cross_entropy(manual.forward(make_batch(data, batch), opts), labels);
      for (size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].second;
        p.clear_grad();
      }
      nn::backward(loss);
      for (size_t i = 0; i < params.size(); ++i) {
        Tensor p = params[i].second;
        auto& value = p.values();
        const std::vector<double>* grad = p.has_grad() ? &p.grad() : nullptr;
        for (size_t j = 0; j < value.size(); ++j) {
          double g = grad ? (*grad)[j] : 0.0;
          g += cfg.weight_decay * value[j];
          vel[i][j] = cfg.momentum * vel[i][j] + g;
          value[j] -= lr * vel[i][j];
        }
      }
    }
  }

  const auto& got = trained.parameters().items();
  for (size_t i = 0; i < params.size(); ++i)
    CHECK(got[i].second.values() == params[i].second.values());
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  auto data = tiny_dataset(2, 3, 8, 9);
  TrainConfig cfg;
  cfg.base_lr = 0.05;
  cfg.total_epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 11;

  auto mcfg = tiny_stgcn(2);
  STGCNModel a(mcfg, build_ntu_graph(), 1);
  STGCNModel b(mcfg, build_ntu_graph(), 1);
  auto ha = train_model(a, data, cfg);
  auto hb = train_model(b, data, cfg);
  REQUIRE(ha.epochs.size() == hb.epochs.size());
  for (size_t e = 0; e < ha.epochs.size(); ++e) {
    CHECK(ha.epochs[e].loss == hb.epochs[e].loss);
    CHECK(ha.epochs[e].top1 == hb.epochs[e].top1);
    CHECK(ha.epochs[e].lr == lr_at(cfg, static_cast<int>(e)));
  }
  const auto& pa = a.parameters().items();
  const auto& pb = b.parameters().items();
  for (size_t i = 0; i < pa.size(); ++i)
    CHECK(pa[i].second.values() == pb[i].second.values());
}

TEST_CASE("zero epochs leaves the model untouched") {
  auto data = tiny_dataset(2, 2, 8, 3);
  TrainConfig cfg;
  cfg.total_epochs = 0;
  auto mcfg = tiny_stgcn(2);
  STGCNModel model(mcfg, build_ntu_graph(), 2);
  auto before = model.to_checkpoint();
  auto history = train_model(model, data, cfg);
  CHECK(history.epochs.empty());
  CHECK(history.stopped_early_at == -1);
  auto after = model.to_checkpoint();
  for (size_t i = 0; i < before.params.size(); ++i)
    CHECK(before.params[i].values == after.params[i].values);
}

TEST_CASE("an absurd learning rate raises a divergence error") {
  auto data = tiny_dataset(2, 3, 8, 13);
  TrainConfig cfg;
  cfg.base_lr = 1e18;
  cfg.total_epochs = 3;
  cfg.batch_size = 2;
  auto mcfg = tiny_stgcn(2);
  STGCNModel model(mcfg, build_ntu_graph(), 3);
  try {
    train_model(model, data, cfg);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    std::string msg = e.what();
    CHECK(msg.find("epoch") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
  }
}

TEST_CASE("training stops early once the accuracy target is hit") {
  auto data = tiny_dataset(2, 2, 8, 17);
  TrainConfig cfg;
  cfg.total_epochs = 50;
  cfg.stop_at_train_accuracy = 0.0;  // any epoch qualifies
  auto mcfg = tiny_stgcn(2);
  STGCNModel model(mcfg, build_ntu_graph(), 4);
  auto history = train_model(model, data, cfg);
  CHECK(history.epochs.size() == 1);
  CHECK(history.stopped_early_at == 0);
}

TEST_CASE("class mismatch between dataset and model is rejected") {
  auto data = tiny_dataset(3, 2, 8, 19);
  TrainConfig cfg;
  cfg.total_epochs = 1;
  auto mcfg = tiny_stgcn(2);  // two classes vs three in the data
  STGCNModel model(mcfg, build_ntu_graph(), 5);
  CHECK_THROWS_AS(train_model(model, data, cfg), ValidationError);
}

TEST_CASE("loss trends downward on a learnable toy problem") {
  auto data = tiny_dataset(3, 8, 16, 23);
  TrainConfig cfg;
  cfg.base_lr = 0.1;
  cfg.total_epochs = 20;
  cfg.batch_size = 8;
  cfg.seed = 29;
  cfg.schedule.step_epochs = 15;
  STGCNConfig mcfg;
  mcfg.layer_channels = {8, 16};
  mcfg.stride_layers = {2};
  mcfg.temporal_kernel = 3;
  mcfg.dropout_p = 0.0;
  mcfg.num_classes = 3;
  STGCNModel model(mcfg, build_ntu_graph(), 6);
  auto history = train_model(model, data, cfg);
  REQUIRE(history.epochs.size() == 20);
  double head = 0.0, tail = 0.0;
  for (int e = 0; e < 5; ++e) head += history.epochs[static_cast<size_t>(e)].loss;
  for (int e = 15; e < 20; ++e) tail += history.epochs[static_cast<size_t>(e)].loss;
  CHECK(tail < head);
  CHECK(history.epochs.back().top1 > history.epochs.front().top1);
}

TEST_CASE("dataset packing is channel-major per sample") {
  auto seq = SkeletonSequence::zeros(4);
  for (int t = 0; t < 4; ++t)
    for (int m = 0; m < 2; ++m)
      for (int v = 0; v < 25; ++v)
        for (int c = 0; c < 3; ++c)
          seq.at(t, m, v, c) = c * 1000 + t * 100 + v + 0.5 * m;
  PreprocessConfig pre;
  pre.target_frames = 4;
  auto data = make_dataset({seq}, 1, pre);
  REQUIRE(data.size() == 1);
  CHECK(data.channels == 3);
  CHECK(data.frames == 4);
  CHECK(data.joints == 25);
  CHECK(data.bodies == 2);
  // layout (c, t, v, m)
  auto at = [&](int c, int t, int v, int m) {
    return data.samples[0][static_cast<size_t>(((c * 4 + t) * 25 + v) * 2 + m)];
  };
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < 4; ++t)
      for (int v = 0; v < 25; ++v)
        for (int m = 0; m < 2; ++m)
          CHECK(at(c, t, v, m) == seq.at(t, m, v, c));
}

TEST_CASE("make_dataset applies the displacement transform before resizing") {
  Rng rng(31);
  auto seq = SkeletonSequence::zeros(12);
  for (auto& v : seq.data) v = rng.normal();
  PreprocessConfig pre;
  pre.target_frames = 6;
  TaylorConfig taylor;  // B=4 step 1: 12 -> 9 frames, then resized to 6
  auto data = make_dataset({seq}, 1, pre, &taylor);
  CHECK(data.frames == 6);
  auto expected = preprocess(taylor_transform(seq, taylor), pre);
  auto at = [&](int c, int t, int v, int m) {
    return data.samples[0][static_cast<size_t>(((c * 6 + t) * 25 + v) * 2 + m)];
  };
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < 6; ++t)
      for (int v = 0; v < 25; ++v)
        for (int m = 0; m < 2; ++m)
          CHECK(at(c, t, v, m) == expected.at(t, m, v, c));
}

TEST_CASE("inconsistent dimensions name the offending sequence") {
  auto a = SkeletonSequence::zeros(8);
  auto b = SkeletonSequence::zeros(8, 2, 20, 3);  // wrong joint count
  PreprocessConfig pre;
  pre.target_frames = 8;
  try {
    make_dataset({a, b}, 1, pre);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("make_batch stacks samples with their shapes intact") {
  auto data = tiny_dataset(2, 2, 8, 37);
  Tensor batch = make_batch(data, {0, 2, 1});
  CHECK(batch.shape() == nn::Shape{3, 3, 8, 25, 2});
  // row k of the batch is sample indices[k]
  const size_t block = static_cast<size_t>(3) * 8 * 25 * 2;
  for (size_t j = 0; j < block; ++j) {
    CHECK(batch.values()[j] == data.samples[0][j]);
    CHECK(batch.values()[block + j] == data.samples[2][j]);
    CHECK(batch.values()[2 * block + j] == data.samples[1][j]);
  }
  CHECK_THROWS_AS(make_batch(data, {}), ValidationError);
  CHECK_THROWS_AS(make_batch(data, {99}), ValidationError);
}

TEST_CASE("manifest-driven datasets load both splits") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "skeltk_train_manifest_test";
  fs::remove_all(dir);
  SynthSpec spec;
  spec.num_classes = 2;
  spec.sequences_per_class = 4;
  spec.frames = 10;
  write_synth_dataset(spec, dir);
  // reload from disk so relative paths resolve against the manifest
  auto manifest = load_manifest(dir / "manifest.json");
  PreprocessConfig pre;
  pre.target_frames = 8;
  auto splits = dataset_from_manifest(manifest, pre);
  CHECK(splits.train.size() == 6);
  CHECK(splits.test.size() == 2);
  CHECK(splits.train.num_classes == 2);
  CHECK(splits.train.frames == 8);
  fs::remove_all(dir);
}

TEST_CASE("history CSV has the documented header") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "skeltk_history_test";
  fs::create_directories(dir);
  TrainHistory history;
  history.epochs.push_back({1.5, 50.0, 0.01});
  history.epochs.push_back({0.7, 75.0, 0.01});
  auto path = (dir / "history.csv").string();
  write_history_csv(history, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,lr,loss,train_top1");
  std::getline(in, line);
  CHECK(line == "0,0.01,1.5,50");
  fs::remove_all(dir);
}
