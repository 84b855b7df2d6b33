#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace skeltk {

inline constexpr int kNtuJointCount = 25;
inline constexpr int kBodySlots = 2;   // absent bodies are zero-padded
inline constexpr int kCoordChannels = 3;

// T x M x V x C array of joint coordinates (meters) plus recording metadata.
// Layout is row-major [t][m][v][c].
struct SkeletonSequence {
  int frames = 0;                 // T
  int bodies = kBodySlots;        // M
  int joints = kNtuJointCount;    // V
  int channels = kCoordChannels;  // C (3, or 6 for concat-mode transforms)
  std::vector<double> data;

  int label = 0;
  int subject_id = 0;
  int camera_id = 0;
  int setup_id = 0;
  std::string source_id;

  std::int64_t value_count() const {
    return static_cast<std::int64_t>(frames) * bodies * joints * channels;
  }

  std::int64_t index(int t, int m, int v, int c) const {
    return ((static_cast<std::int64_t>(t) * bodies + m) * joints + v) * channels + c;
  }

  double& at(int t, int m, int v, int c) { return data[index(t, m, v, c)]; }
  double at(int t, int m, int v, int c) const { return data[index(t, m, v, c)]; }

  static SkeletonSequence zeros(int frames, int bodies = kBodySlots,
                                int joints = kNtuJointCount,
                                int channels = kCoordChannels);

  // Checks T >= 1, buffer size, finiteness of every coordinate, and
  // (when num_classes >= 0) that the label is in range. Throws ValidationError.
  void validate(int num_classes = -1) const;
};

struct PreprocessConfig {
  int target_frames = 64;
  int center_joint = 0;  // spine base in the NTU topology
  bool center = false;   // subtract each body's first-frame root position

  void validate() const;  // target_frames >= 2
};

// Linear interpolation along time, per body/joint/coordinate. Metadata is
// carried over unchanged. target_frames == frames returns a bitwise copy.
SkeletonSequence resize_sequence(const SkeletonSequence& seq, int target_frames);

// Subtracts each body's first-frame root-joint position from all of that
// body's frames. Bodies whose first-frame root is exactly zero (padding)
// are left untouched.
SkeletonSequence center_sequence(const SkeletonSequence& seq, int root_joint);

// resize + optional centering, in that order.
SkeletonSequence preprocess(const SkeletonSequence& seq, const PreprocessConfig& cfg);

}  // namespace skeltk
