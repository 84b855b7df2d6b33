#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "skeltk/error.hpp"
#include "skeltk/evaluate.hpp"
#include "skeltk/fixtures.hpp"
#include "skeltk/manifest.hpp"
#include "skeltk/models.hpp"
#include "skeltk/nn/checkpoint.hpp"
#include "skeltk/ntu_actions.hpp"
#include "skeltk/render.hpp"
#include "skeltk/sequence_json.hpp"
#include "skeltk/synth.hpp"
#include "skeltk/taylor.hpp"
#include "skeltk/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace skeltk;

namespace {

fs::path resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SKELTK_OUT_DIR"))
    if (*env) return env;
  return ".";
}

int env_threads() {
  if (const char* env = std::getenv("SKELTK_THREADS")) {
    try {
      int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

// Every run leaves its resolved settings next to its outputs.
void write_snapshot(const fs::path& dir, const std::string& command,
                    const json& settings) {
  json doc = {{"format", "skeltk-run-config"},
              {"version", 1},
              {"command", command},
              {"settings", settings}};
  const fs::path path = dir / (command + ".config.json");
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write \"" + path.string() + "\"");
  out << doc.dump(2) << '\n';
}

std::vector<std::string> class_names_for(int num_classes) {
  const auto& ntu = ntu_action_names();
  if (num_classes == 60 || num_classes == 120)
    return {ntu.begin(), ntu.begin() + num_classes};
  std::vector<std::string> names(num_classes);
  for (int c = 0; c < num_classes; ++c) names[c] = "class " + std::to_string(c);
  return names;
}

json taylor_to_json(const TaylorConfig& cfg) {
  return {{"block_frames", cfg.block_frames},
          {"step", cfg.step},
          {"order", cfg.order},
          {"mode", to_string(cfg.mode)}};
}

json preprocess_to_json(const PreprocessConfig& cfg) {
  return {{"target_frames", cfg.target_frames},
          {"center_joint", cfg.center_joint},
          {"center", cfg.center}};
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  int classes = 8;
  int per_class = 16;
  int frames = 48;
  double noise = 0.05;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int run_synth(const SynthArgs& args) {
  SynthSpec spec;
  spec.seed = args.seed;
  spec.num_classes = args.classes;
  spec.sequences_per_class = args.per_class;
  spec.frames = args.frames;
  spec.noise = args.noise;
  const fs::path dir = resolve_out_dir(args.out_dir);
  fs::create_directories(dir);
  DatasetManifest manifest = write_synth_dataset(spec, dir);
  write_snapshot(dir, "synth",
                 {{"classes", spec.num_classes},
                  {"per_class", spec.sequences_per_class},
                  {"frames", spec.frames},
                  {"noise", spec.noise},
                  {"seed", spec.seed},
                  {"out", dir.string()}});
  std::cout << "wrote " << manifest.sequences.size() << " sequences and "
            << (dir / "manifest.json").string() << "\n";
  return 0;
}

struct TransformArgs {
  std::string in_path;
  int block = 4;
  int step = 1;
  int order = 1;
  std::string mode = "replace";
  std::string out_dir;
  std::string out_name;
  std::string motion_name;
};

int run_transform(const TransformArgs& args) {
  TaylorConfig cfg;
  cfg.block_frames = args.block;
  cfg.step = args.step;
  cfg.order = args.order;
  cfg.mode = taylor_mode_from_string(args.mode);

  SkeletonSequence seq = load_sequence_file(args.in_path);
  SkeletonSequence out = taylor_transform(seq, cfg);

  const fs::path dir = resolve_out_dir(args.out_dir);
  fs::create_directories(dir);
  std::string name = args.out_name;
  if (name.empty()) name = fs::path(args.in_path).stem().string() + ".taylor.json";
  save_sequence_file(out, dir / name);

  json settings = {{"in", args.in_path},
                   {"taylor", taylor_to_json(cfg)},
                   {"out", (dir / name).string()}};
  if (!args.motion_name.empty()) {
    MotionField field = motion_magnitude(seq, cfg);
    json frames = json::array();
    for (int t = 0; t < field.frames; ++t) {
      json bodies = json::array();
      for (int m = 0; m < field.bodies; ++m) {
        json joints = json::array();
        for (int v = 0; v < field.joints; ++v) joints.push_back(field.at(t, m, v));
        bodies.push_back(std::move(joints));
      }
      frames.push_back(std::move(bodies));
    }
    json doc = {{"format", "skeltk-motion"}, {"version", 1},
                {"frames", field.frames},  {"bodies", field.bodies},
                {"joints", field.joints},  {"source_id", field.source_id},
                {"magnitudes", std::move(frames)}};
    write_text_file((dir / args.motion_name).string(), doc.dump(2) + "\n");
    settings["motion_out"] = (dir / args.motion_name).string();
  }
  write_snapshot(dir, "transform", settings);
  std::cout << "wrote " << (dir / name).string() << " (" << out.frames
            << " frames, " << out.channels << " channels)\n";
  return 0;
}

struct TrainArgs {
  std::string model = "stgcn";
  std::string input = "original";
  std::string manifest;
  std::string config_path;
  std::string model_config_path;
  std::string out_dir;
  std::string checkpoint_name = "checkpoint.json";
  std::string history_name = "history.csv";
  int target_frames = 64;
  bool center = false;
  int block = 4, step = 1, order = 1;
  std::string taylor_mode = "replace";
  // flag overrides; negative means "not given"
  int epochs = -1;
  int batch_size = -1;
  double lr = -1.0;
  long long seed = -1;
};

TrainConfig default_train_config(const std::string& model) {
  TrainConfig cfg;
  if (model == "hyperformer") {
    cfg.base_lr = 0.025;
    cfg.schedule.kind = ScheduleKind::milestones;
    cfg.schedule.milestones = {110, 120};
    cfg.total_epochs = 140;
    cfg.batch_size = 128;
  } else {
    cfg.base_lr = 0.01;
    cfg.schedule.kind = ScheduleKind::step;
    cfg.schedule.step_epochs = 10;
    cfg.total_epochs = 80;
    cfg.batch_size = 32;
  }
  return cfg;
}

int run_train(const TrainArgs& args) {
  if (args.model != "stgcn" && args.model != "hyperformer")
    throw ValidationError("unknown model \"" + args.model + "\"");
  if (args.input != "original" && args.input != "taylor")
    throw ValidationError("unknown input kind \"" + args.input + "\"");

  TrainConfig tc = default_train_config(args.model);
  if (!args.config_path.empty()) tc = load_train_config(args.config_path, tc);
  if (args.epochs >= 0) tc.total_epochs = args.epochs;
  if (args.batch_size >= 1) tc.batch_size = args.batch_size;
  if (args.lr > 0) tc.base_lr = args.lr;
  if (args.seed >= 0) tc.seed = static_cast<std::uint64_t>(args.seed);
  if (args.config_path.empty() && tc.schedule.kind == ScheduleKind::milestones) {
    // built-in milestones shrink with a short --epochs override
    std::erase_if(tc.schedule.milestones,
                  [&](int m) { return m >= tc.total_epochs; });
  }
  tc.validate();

  PreprocessConfig pre;
  pre.target_frames = args.target_frames;
  pre.center = args.center;

  TaylorConfig taylor;
  taylor.block_frames = args.block;
  taylor.step = args.step;
  taylor.order = args.order;
  taylor.mode = taylor_mode_from_string(args.taylor_mode);
  const bool use_taylor = args.input == "taylor";

  DatasetManifest manifest = load_manifest(args.manifest);
  DatasetSplits splits =
      dataset_from_manifest(manifest, pre, use_taylor ? &taylor : nullptr);
  if (splits.train.size() == 0)
    throw ValidationError("manifest has no training sequences");

  std::unique_ptr<Model> model;
  std::string model_config_text;
  if (!args.model_config_path.empty()) {
    std::ifstream in(args.model_config_path);
    if (!in)
      throw ParseError("cannot open model config \"" + args.model_config_path + "\"");
    model_config_text.assign(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>());
  }
  if (args.model == "stgcn") {
    STGCNConfig mc;
    if (!model_config_text.empty()) mc = STGCNConfig::from_json(model_config_text);
    mc.in_channels = splits.train.channels;
    mc.num_classes = manifest.num_classes;
    model = std::make_unique<STGCNModel>(mc, build_ntu_graph(), tc.seed);
  } else {
    HyperformerConfig mc;
    if (!model_config_text.empty())
      mc = HyperformerConfig::from_json(model_config_text);
    mc.in_channels = splits.train.channels;
    mc.num_classes = manifest.num_classes;
    mc.target_frames = pre.target_frames;
    model = std::make_unique<HyperformerModel>(mc, build_bodypart_hypergraph(),
                                               tc.seed);
  }

  TrainHistory history = train_model(*model, splits.train, tc);

  const fs::path dir = resolve_out_dir(args.out_dir);
  fs::create_directories(dir);
  nn::save_checkpoint(model->to_checkpoint(), dir / args.checkpoint_name);
  write_history_csv(history, (dir / args.history_name).string());

  json settings = {{"model", args.model},
                   {"input", args.input},
                   {"manifest", args.manifest},
                   {"train", json::parse(train_config_to_json(tc))},
                   {"model_config", json::parse(model->config_json())},
                   {"preprocess", preprocess_to_json(pre)},
                   {"checkpoint", (dir / args.checkpoint_name).string()},
                   {"history", (dir / args.history_name).string()}};
  if (use_taylor) settings["taylor"] = taylor_to_json(taylor);
  write_snapshot(dir, "train", settings);

  if (!history.epochs.empty()) {
    const EpochStats& last = history.epochs.back();
    std::cout << "trained " << history.epochs.size() << " epochs, final loss "
              << last.loss << ", train top-1 " << last.top1 << "%";
    if (history.stopped_early_at >= 0)
      std::cout << " (target accuracy reached at epoch "
                << history.stopped_early_at << ")";
    std::cout << "\n";
  } else {
    std::cout << "trained 0 epochs (parameters left at initialization)\n";
  }
  std::cout << "wrote " << (dir / args.checkpoint_name).string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string input = "original";
  std::string split = "test";
  std::string tag;
  int batch_size = 32;
  int threads = 0;  // 0: use SKELTK_THREADS or 1
  std::string out_dir;
  std::string report_name = "report.json";
  std::string confusion_name = "confusion.csv";
  int target_frames = 64;
  bool center = false;
  int block = 4, step = 1, order = 1;
  std::string taylor_mode = "replace";
};

int run_eval(const EvalArgs& args) {
  if (args.input != "original" && args.input != "taylor")
    throw ValidationError("unknown input kind \"" + args.input + "\"");
  if (args.split != "train" && args.split != "test")
    throw ValidationError("unknown split \"" + args.split + "\"");

  std::unique_ptr<Model> model = model_from_checkpoint(nn::load_checkpoint(args.checkpoint));

  PreprocessConfig pre;
  pre.target_frames = args.target_frames;
  pre.center = args.center;
  TaylorConfig taylor;
  taylor.block_frames = args.block;
  taylor.step = args.step;
  taylor.order = args.order;
  taylor.mode = taylor_mode_from_string(args.taylor_mode);
  const bool use_taylor = args.input == "taylor";

  DatasetManifest manifest = load_manifest(args.manifest);
  DatasetSplits splits =
      dataset_from_manifest(manifest, pre, use_taylor ? &taylor : nullptr);
  const Dataset& data = args.split == "train" ? splits.train : splits.test;
  if (data.size() == 0)
    throw ValidationError("manifest has no sequences in the " + args.split +
                          " split");

  const int threads = args.threads >= 1 ? args.threads : env_threads();
  std::string tag = args.tag;
  if (tag.empty()) tag = model->kind() + "/" + args.input + "/" + args.split;
  EvalReport report = evaluate_model(*model, data, args.batch_size, threads, tag);

  const fs::path dir = resolve_out_dir(args.out_dir);
  fs::create_directories(dir);
  save_report(report, (dir / args.report_name).string());
  write_confusion_csv(report, (dir / args.confusion_name).string());

  json settings = {{"checkpoint", args.checkpoint},
                   {"manifest", args.manifest},
                   {"input", args.input},
                   {"split", args.split},
                   {"batch_size", args.batch_size},
                   {"threads", threads},
                   {"tag", tag},
                   {"preprocess", preprocess_to_json(pre)},
                   {"report", (dir / args.report_name).string()},
                   {"confusion", (dir / args.confusion_name).string()}};
  if (use_taylor) settings["taylor"] = taylor_to_json(taylor);
  write_snapshot(dir, "eval", settings);

  std::cout << "samples " << report.sample_count << ", top-1 " << report.top1
            << "%, top-5 " << report.top5 << "%\n";
  std::cout << "wrote " << (dir / args.report_name).string() << "\n";
  return 0;
}

struct CompareArgs {
  std::string report_a;
  std::string report_b;
  int top = 10;
  std::string out_dir;
  std::string text_name = "delta.txt";
  std::string csv_name = "delta.csv";
};

int run_compare(const CompareArgs& args) {
  EvalReport a = load_report(args.report_a);
  EvalReport b = load_report(args.report_b);
  DeltaTable table =
      delta_table(a, b, args.top, class_names_for(a.num_classes));
  const std::string text = delta_table_text(table);
  std::cout << "comparing \"" << a.tag << "\" -> \"" << b.tag << "\"\n" << text;

  const fs::path dir = resolve_out_dir(args.out_dir);
  fs::create_directories(dir);
  write_text_file((dir / args.text_name).string(), text);
  write_delta_csv(table, (dir / args.csv_name).string());
  write_snapshot(dir, "compare",
                 {{"report_a", args.report_a},
                  {"report_b", args.report_b},
                  {"top", args.top},
                  {"text", (dir / args.text_name).string()},
                  {"csv", (dir / args.csv_name).string()}});
  return 0;
}

struct RenderArgs {
  std::string in_path;      // sequence mode
  std::string report_path;  // heatmap mode
  int frame = 0;
  int body = 0;
  bool motion = false;
  int block = 4, step = 1;
  double threshold = 5.0;
  std::string out_dir;
  std::string svg_name;
};

int run_render(const RenderArgs& args) {
  const fs::path dir = resolve_out_dir(args.out_dir);
  fs::create_directories(dir);
  RenderStyle style;

  if (!args.in_path.empty()) {
    SkeletonSequence seq = load_sequence_file(args.in_path);
    if (seq.channels < 3)
      throw ValidationError("sequence has fewer than 3 coordinate channels");

    const std::vector<double>* mags = nullptr;
    std::vector<double> motion_row;
    int pose_frame = args.frame;
    if (args.motion) {
      TaylorConfig cfg;
      cfg.block_frames = args.block;
      cfg.step = args.step;
      MotionField field = motion_magnitude(seq, cfg);
      if (args.frame < 0 || args.frame >= field.frames)
        throw ValidationError("motion frame " + std::to_string(args.frame) +
                              " outside [0, " + std::to_string(field.frames) + ")");
      motion_row.resize(seq.joints);
      for (int v = 0; v < seq.joints; ++v)
        motion_row[v] = field.at(args.frame, args.body, v);
      mags = &motion_row;
      pose_frame = args.frame * cfg.step;
    }
    if (pose_frame < 0 || pose_frame >= seq.frames)
      throw ValidationError("frame " + std::to_string(pose_frame) +
                            " outside [0, " + std::to_string(seq.frames) + ")");
    if (args.body < 0 || args.body >= seq.bodies)
      throw ValidationError("body " + std::to_string(args.body) +
                            " outside [0, " + std::to_string(seq.bodies) + ")");

    Matrix pose(seq.joints, 3);
    for (int v = 0; v < seq.joints; ++v)
      for (int c = 0; c < 3; ++c) pose.at(v, c) = seq.at(pose_frame, args.body, v, c);

    const std::string name = args.svg_name.empty() ? "skeleton.svg" : args.svg_name;
    write_text_file((dir / name).string(),
                    render_skeleton_svg(pose, mags, build_ntu_graph(), style));
    write_snapshot(dir, "render",
                   {{"in", args.in_path},
                    {"frame", args.frame},
                    {"body", args.body},
                    {"motion", args.motion},
                    {"block", args.block},
                    {"step", args.step},
                    {"svg", (dir / name).string()}});
    std::cout << "wrote " << (dir / name).string() << "\n";
    return 0;
  }

  EvalReport report = load_report(args.report_path);
  Matrix filtered = filter_confusion(report, args.threshold);
  const std::string name = args.svg_name.empty() ? "confusion.svg" : args.svg_name;
  write_text_file(
      (dir / name).string(),
      render_confusion_svg(filtered, class_names_for(report.num_classes), style));
  write_snapshot(dir, "render",
                 {{"report", args.report_path},
                  {"threshold", args.threshold},
                  {"svg", (dir / name).string()}});
  std::cout << "wrote " << (dir / name).string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skeleton action recognition toolkit"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--classes", synth_args.classes, "number of action classes");
  synth->add_option("--per-class", synth_args.per_class, "sequences per class");
  synth->add_option("--frames", synth_args.frames, "frames per sequence");
  synth->add_option("--noise", synth_args.noise, "jitter amount");
  synth->add_option("--seed", synth_args.seed, "generator seed");
  synth->add_option("--out", synth_args.out_dir, "output directory");

  TransformArgs transform_args;
  CLI::App* transform =
      app.add_subcommand("transform", "apply the displacement transform");
  transform->add_option("--in", transform_args.in_path, "input sequence")
      ->required();
  transform->add_option("--block", transform_args.block, "frames per block");
  transform->add_option("--step", transform_args.step, "block stride");
  transform->add_option("--order", transform_args.order, "difference order");
  transform->add_option("--mode", transform_args.mode, "replace or concat");
  transform->add_option("--out", transform_args.out_dir, "output directory");
  transform->add_option("--out-name", transform_args.out_name,
                        "output file name");
  transform->add_option("--motion-out", transform_args.motion_name,
                        "also write per-joint motion magnitudes");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--model", train_args.model, "stgcn or hyperformer");
  train->add_option("--input", train_args.input, "original or taylor");
  train->add_option("--manifest", train_args.manifest, "dataset manifest")
      ->required();
  train->add_option("--config", train_args.config_path, "train config JSON");
  train->add_option("--model-config", train_args.model_config_path,
                    "model config JSON");
  train->add_option("--out", train_args.out_dir, "output directory");
  train->add_option("--checkpoint-name", train_args.checkpoint_name,
                    "checkpoint file name");
  train->add_option("--history-name", train_args.history_name,
                    "history CSV name");
  train->add_option("--target-frames", train_args.target_frames,
                    "resize sequences to this length");
  train->add_flag("--center", train_args.center, "center on the root joint");
  train->add_option("--block", train_args.block, "transform block size");
  train->add_option("--step", train_args.step, "transform block stride");
  train->add_option("--order", train_args.order, "transform difference order");
  train->add_option("--taylor-mode", train_args.taylor_mode,
                    "replace or concat");
  train->add_option("--epochs", train_args.epochs, "override total epochs");
  train->add_option("--batch-size", train_args.batch_size,
                    "override batch size");
  train->add_option("--lr", train_args.lr, "override base learning rate");
  train->add_option("--seed", train_args.seed, "override seed");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")
      ->required();
  eval->add_option("--manifest", eval_args.manifest, "dataset manifest")
      ->required();
  eval->add_option("--input", eval_args.input, "original or taylor");
  eval->add_option("--split", eval_args.split, "train or test");
  eval->add_option("--tag", eval_args.tag, "report label");
  eval->add_option("--batch-size", eval_args.batch_size, "evaluation batch size");
  eval->add_option("--threads", eval_args.threads,
                   "worker threads (default: SKELTK_THREADS or 1)");
  eval->add_option("--out", eval_args.out_dir, "output directory");
  eval->add_option("--report-name", eval_args.report_name, "report file name");
  eval->add_option("--confusion-name", eval_args.confusion_name,
                   "confusion CSV name");
  eval->add_option("--target-frames", eval_args.target_frames,
                   "resize sequences to this length");
  eval->add_flag("--center", eval_args.center, "center on the root joint");
  eval->add_option("--block", eval_args.block, "transform block size");
  eval->add_option("--step", eval_args.step, "transform block stride");
  eval->add_option("--order", eval_args.order, "transform difference order");
  eval->add_option("--taylor-mode", eval_args.taylor_mode, "replace or concat");

  CompareArgs compare_args;
  CLI::App* compare = app.add_subcommand("compare", "diff two eval reports");
  compare->add_option("report_a", compare_args.report_a, "baseline report")
      ->required();
  compare->add_option("report_b", compare_args.report_b, "comparison report")
      ->required();
  compare->add_option("--top", compare_args.top, "rows per direction");
  compare->add_option("--out", compare_args.out_dir, "output directory");
  compare->add_option("--text-name", compare_args.text_name, "text file name");
  compare->add_option("--csv-name", compare_args.csv_name, "CSV file name");

  RenderArgs render_args;
  CLI::App* render = app.add_subcommand("render", "draw a pose or a heatmap");
  CLI::Option* render_in =
      render->add_option("--in", render_args.in_path, "sequence to draw");
  CLI::Option* render_report = render->add_option(
      "--report", render_args.report_path, "eval report to draw as a heatmap");
  render_in->excludes(render_report);
  render->add_option("--frame", render_args.frame, "frame index");
  render->add_option("--body", render_args.body, "body slot");
  render->add_flag("--motion", render_args.motion,
                   "overlay per-joint motion circles");
  render->add_option("--block", render_args.block, "motion block size");
  render->add_option("--step", render_args.step, "motion block stride");
  render->add_option("--threshold", render_args.threshold,
                     "filter percent threshold");
  render->add_option("--out", render_args.out_dir, "output directory");
  render->add_option("--svg-name", render_args.svg_name, "SVG file name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (transform->parsed()) return run_transform(transform_args);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (compare->parsed()) return run_compare(compare_args);
    if (render->parsed()) {
      if (render_args.in_path.empty() && render_args.report_path.empty()) {
        std::cerr << "render: pass one of --in or --report\n";
        return 1;
      }
      return run_render(render_args);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
