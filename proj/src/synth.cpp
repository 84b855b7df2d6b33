#include "skeltk/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "skeltk/error.hpp"
#include "skeltk/rng.hpp"
#include "skeltk/sequence_json.hpp"

namespace skeltk {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Neutral standing pose, meters, facing the camera. Indexing follows the
// 25-joint NTU layout (0 spine base ... 24 right thumb).
constexpr double kBasePose[25][3] = {
    {0.00, 0.00, 0.00},    // 0 spine base
    {0.00, 0.26, 0.00},    // 1 spine mid
    {0.00, 0.50, 0.00},    // 2 neck
    {0.00, 0.62, 0.00},    // 3 head
    {-0.17, 0.46, 0.00},   // 4 left shoulder
    {-0.30, 0.28, 0.00},   // 5 left elbow
    {-0.34, 0.10, 0.00},   // 6 left wrist
    {-0.35, 0.04, 0.00},   // 7 left hand
    {0.17, 0.46, 0.00},    // 8 right shoulder
    {0.30, 0.28, 0.00},    // 9 right elbow
    {0.34, 0.10, 0.00},    // 10 right wrist
    {0.35, 0.04, 0.00},    // 11 right hand
    {-0.09, -0.04, 0.00},  // 12 left hip
    {-0.10, -0.45, 0.00},  // 13 left knee
    {-0.10, -0.85, 0.00},  // 14 left ankle
    {-0.12, -0.90, 0.08},  // 15 left foot
    {0.09, -0.04, 0.00},   // 16 right hip
    {0.10, -0.45, 0.00},   // 17 right knee
    {0.10, -0.85, 0.00},   // 18 right ankle
    {0.12, -0.90, 0.08},   // 19 right foot
    {0.00, 0.44, 0.00},    // 20 spine shoulder
    {-0.36, -0.01, 0.00},  // 21 left hand tip
    {-0.32, 0.01, 0.03},   // 22 left thumb
    {0.36, -0.01, 0.00},   // 23 right hand tip
    {0.32, 0.01, 0.03},    // 24 right thumb
};

void rotate_about_z(std::vector<double>& pose, int center,
                    const std::vector<int>& joints, double angle) {
  const double cx = pose[center * 3 + 0];
  const double cy = pose[center * 3 + 1];
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (int j : joints) {
    const double x = pose[j * 3 + 0] - cx;
    const double y = pose[j * 3 + 1] - cy;
    pose[j * 3 + 0] = cx + ca * x - sa * y;
    pose[j * 3 + 1] = cy + sa * x + ca * y;
  }
}

const std::vector<int> kRightArm = {9, 10, 11, 23, 24};
const std::vector<int> kLeftArm = {5, 6, 7, 21, 22};
const std::vector<int> kLeftLeg = {13, 14, 15};
const std::vector<int> kUpperBody = {1, 2,  3,  4,  5,  6,  7,  8,
                                     9, 10, 11, 20, 21, 22, 23, 24};
const std::vector<int> kHeadNeck = {2, 3};

// Deforms the base pose for motion pattern `pattern` at cycle angle theta.
// amp scales every deformation amplitude; s01 is the smooth 0..1 ramp of theta.
void apply_pattern(std::vector<double>& pose, int pattern, double theta,
                   double amp) {
  const double s01 = 0.5 - 0.5 * std::cos(theta);
  switch (pattern) {
    case 0:  // static pose
      break;
    case 1:  // right arm raise
      rotate_about_z(pose, 8, kRightArm, amp * -2.0 * s01);
      break;
    case 2:  // left leg swing
      rotate_about_z(pose, 12, kLeftLeg, amp * 0.7 * std::sin(theta));
      break;
    case 3:  // both arms waving in antiphase
      rotate_about_z(pose, 4, kLeftArm, amp * 1.0 * std::sin(theta));
      rotate_about_z(pose, 8, kRightArm, amp * 1.0 * std::sin(theta));
      break;
    case 4:  // torso lean side to side
      rotate_about_z(pose, 0, kUpperBody, amp * 0.5 * std::sin(theta));
      break;
    case 5:  // head nodding (fast, small)
      rotate_about_z(pose, 20, kHeadNeck, amp * 0.45 * std::sin(2.0 * theta));
      break;
    case 6:  // vertical jump
      for (int j = 0; j < 25; ++j)
        pose[j * 3 + 1] += amp * 0.25 * std::fabs(std::sin(theta));
      break;
    case 7: {  // squat: compress toward ankle level, knees out
      const double ankle_y = kBasePose[14][1];
      const double c = 1.0 - amp * 0.3 * s01;
      for (int j = 0; j < 25; ++j) {
        if (j == 14 || j == 15 || j == 18 || j == 19) continue;
        pose[j * 3 + 1] = ankle_y + (pose[j * 3 + 1] - ankle_y) * c;
      }
      pose[13 * 3 + 0] -= amp * 0.10 * s01;
      pose[17 * 3 + 0] += amp * 0.10 * s01;
      break;
    }
    default:
      break;
  }
}

double pattern_cycles(int pattern) {
  switch (pattern) {
    case 1: return 2.0;
    case 2: return 2.0;
    case 3: return 3.0;
    case 4: return 1.5;
    case 5: return 2.0;
    case 6: return 3.0;
    case 7: return 2.0;
    default: return 1.0;
  }
}

}  // namespace

void SynthSpec::validate() const {
  if (num_classes < 2)
    throw ValidationError("synth: num_classes must be >= 2");
  if (sequences_per_class < 1)
    throw ValidationError("synth: sequences_per_class must be >= 1");
  if (frames < 8)
    throw ValidationError("synth: frames must be >= 8");
  if (noise < 0.0)
    throw ValidationError("synth: noise must be >= 0");
}

std::vector<double> synth_base_pose() {
  std::vector<double> pose(25 * 3);
  for (int j = 0; j < 25; ++j)
    for (int c = 0; c < 3; ++c) pose[j * 3 + c] = kBasePose[j][c];
  return pose;
}

std::vector<SkeletonSequence> synth_generate(const SynthSpec& spec) {
  spec.validate();
  Rng root(spec.seed);
  std::vector<SkeletonSequence> out;
  out.reserve(static_cast<size_t>(spec.num_classes) * spec.sequences_per_class);

  for (int c = 0; c < spec.num_classes; ++c) {
    const int pattern = c % 8;
    const int variant = c / 8;
    const double cycles = pattern_cycles(pattern) * (1.0 + 0.5 * variant);
    for (int k = 0; k < spec.sequences_per_class; ++k) {
      Rng rng = root.fork(static_cast<std::uint64_t>(c) * 1000003u +
                          static_cast<std::uint64_t>(k));
      // Every draw is scaled by noise so noise=0 collapses the class to a
      // single exemplar; the draws still happen so the stream stays aligned.
      const double phase = spec.noise * rng.uniform(-1.0, 1.0);
      const double amp = 1.0 + spec.noise * rng.uniform(-0.4, 0.4);
      const double speed = 1.0 + spec.noise * rng.uniform(-0.25, 0.25);

      SkeletonSequence seq = SkeletonSequence::zeros(spec.frames);
      seq.label = c;
      seq.subject_id = 1 + k % 4;
      seq.camera_id = 1 + k % 3;
      seq.setup_id = 1 + k % 2;
      seq.source_id = "synth_c" + std::to_string(c) + "_k" + std::to_string(k);

      for (int t = 0; t < spec.frames; ++t) {
        const double u = static_cast<double>(t) / (spec.frames - 1);
        const double theta = 2.0 * kPi * cycles * speed * u + phase;
        std::vector<double> pose = synth_base_pose();
        if (variant > 0 && pattern == 0)
          rotate_about_z(pose, 0, kUpperBody, 0.15 * variant);
        apply_pattern(pose, pattern, theta, amp);
        for (int v = 0; v < 25; ++v)
          for (int ch = 0; ch < 3; ++ch)
            seq.at(t, 0, v, ch) =
                pose[v * 3 + ch] + spec.noise * 0.02 * rng.normal();
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

DatasetManifest write_synth_dataset(const SynthSpec& spec,
                                    const std::filesystem::path& dir) {
  std::vector<SkeletonSequence> seqs = synth_generate(spec);
  std::filesystem::create_directories(dir);

  DatasetManifest m;
  m.num_classes = spec.num_classes;
  m.split_rule = SplitRule::cross_subject;
  m.train_ids = {1, 2, 3};
  m.test_ids = {4};

  for (size_t i = 0; i < seqs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%05zu.json", i);
    save_sequence_file(seqs[i], dir / name);
    ManifestEntry e;
    e.path = name;  // relative to the manifest
    e.label = seqs[i].label;
    e.subject_id = seqs[i].subject_id;
    e.camera_id = seqs[i].camera_id;
    e.setup_id = seqs[i].setup_id;
    m.sequences.push_back(std::move(e));
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace skeltk
