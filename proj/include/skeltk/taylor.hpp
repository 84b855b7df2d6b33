#pragma once

#include <string>
#include <vector>

#include "skeltk/sequence.hpp"

namespace skeltk {

enum class TaylorMode { replace, concat };

std::string to_string(TaylorMode mode);
TaylorMode taylor_mode_from_string(const std::string& s);

// Sliding-block derivative aggregation settings. Over each window of
// block_frames consecutive frames, forward differences up to `order` are
// averaged and combined with factorial weights 1/n!; the result either
// replaces the joint positions (displaced pose, C stays 3) or is appended as
// extra channels (C doubles).
struct TaylorConfig {
  int block_frames = 4;
  int step = 1;
  int order = 1;
  TaylorMode mode = TaylorMode::replace;

  void validate() const;  // block_frames >= 2, step >= 1, 1 <= order <= block_frames-1
};

// Per-joint motion intensities aligned with the transform's output frames.
struct MotionField {
  int frames = 0;
  int bodies = 0;
  int joints = 0;
  std::vector<double> magnitudes;  // row-major [t][m][v], all >= 0
  std::string source_id;

  double& at(int t, int m, int v) {
    return magnitudes[(static_cast<size_t>(t) * bodies + m) * joints + v];
  }
  double at(int t, int m, int v) const {
    return magnitudes[(static_cast<size_t>(t) * bodies + m) * joints + v];
  }
};

// Order-n forward difference along time. Output has frames = T - n; order 1
// is x[t+1] - x[t], order n applies the order-1 difference to the order-(n-1)
// result. Metadata (label, ids) is carried over.
SkeletonSequence forward_differences(const SkeletonSequence& seq, int n);

// Sliding-block transform. Blocks start at t in {0, step, 2*step, ...} with
// t + block_frames <= T, so the output has floor((T - B) / step) + 1 frames.
// Per block, the displacement is sum over n of (1/n!) times the mean order-n
// forward difference across the block's valid offsets (B - n of them). With
// mode=replace the output frame is the block's first pose plus the
// displacement; with mode=concat the displacement is appended as extra
// channels instead.
SkeletonSequence taylor_transform(const SkeletonSequence& seq,
                                  const TaylorConfig& cfg);

// Euclidean norm (over coordinates) of each joint's block-mean first
// difference, on the same block grid as taylor_transform. Order/mode fields
// of cfg are ignored: intensity is always first-order.
MotionField motion_magnitude(const SkeletonSequence& seq, const TaylorConfig& cfg);

}  // namespace skeltk
