#include "skeltk/sequence.hpp"

#include <cmath>

#include "skeltk/error.hpp"

namespace skeltk {

SkeletonSequence SkeletonSequence::zeros(int frames, int bodies, int joints,
                                         int channels) {
  SkeletonSequence s;
  s.frames = frames;
  s.bodies = bodies;
  s.joints = joints;
  s.channels = channels;
  s.data.assign(static_cast<size_t>(s.value_count()), 0.0);
  return s;
}

void SkeletonSequence::validate(int num_classes) const {
  if (frames < 1) throw ValidationError("sequence: frame count must be >= 1");
  if (bodies < 1 || joints < 1 || channels < 1)
    throw ValidationError("sequence: degenerate dimensions");
  if (static_cast<std::int64_t>(data.size()) != value_count())
    throw ValidationError("sequence: buffer size does not match T*M*V*C");
  for (size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i]))
      throw ValidationError("sequence: non-finite coordinate at flat index " +
                            std::to_string(i));
  }
  if (num_classes >= 0 && (label < 0 || label >= num_classes))
    throw ValidationError("sequence: label " + std::to_string(label) +
                          " outside [0, " + std::to_string(num_classes) + ")");
}

void PreprocessConfig::validate() const {
  if (target_frames < 2)
    throw ValidationError("preprocess: target_frames must be >= 2");
  if (center_joint < 0)
    throw ValidationError("preprocess: center_joint must be >= 0");
}

SkeletonSequence resize_sequence(const SkeletonSequence& seq, int target_frames) {
  if (seq.frames < 1) throw ValidationError("resize: input has no frames");
  if (target_frames < 2) throw ValidationError("resize: target_frames must be >= 2");

  SkeletonSequence out = seq;
  out.frames = target_frames;
  out.data.assign(static_cast<size_t>(out.value_count()), 0.0);

  const int stride = seq.bodies * seq.joints * seq.channels;
  // Endpoint-aligned sampling; integer arithmetic keeps identity resizes
  // bitwise exact.
  for (int i = 0; i < target_frames; ++i) {
    const std::int64_t num = static_cast<std::int64_t>(i) * (seq.frames - 1);
    const std::int64_t den = target_frames - 1;
    const int lo = static_cast<int>(num / den);
    const std::int64_t rem = num % den;
    const double* src_lo = seq.data.data() + static_cast<std::int64_t>(lo) * stride;
    double* dst = out.data.data() + static_cast<std::int64_t>(i) * stride;
    if (rem == 0) {
      for (int k = 0; k < stride; ++k) dst[k] = src_lo[k];
    } else {
      const double frac = static_cast<double>(rem) / static_cast<double>(den);
      const double* src_hi = src_lo + stride;
      for (int k = 0; k < stride; ++k)
        dst[k] = src_lo[k] * (1.0 - frac) + src_hi[k] * frac;
    }
  }
  return out;
}

SkeletonSequence center_sequence(const SkeletonSequence& seq, int root_joint) {
  if (root_joint < 0 || root_joint >= seq.joints)
    throw ValidationError("center: root joint " + std::to_string(root_joint) +
                          " outside [0, " + std::to_string(seq.joints) + ")");
  SkeletonSequence out = seq;
  for (int m = 0; m < seq.bodies; ++m) {
    double root[3] = {0.0, 0.0, 0.0};
    bool all_zero = true;
    for (int c = 0; c < seq.channels && c < 3; ++c) {
      root[c] = seq.at(0, m, root_joint, c);
      if (root[c] != 0.0) all_zero = false;
    }
    if (all_zero) continue;  // zero-padded body slot
    for (int t = 0; t < seq.frames; ++t)
      for (int v = 0; v < seq.joints; ++v)
        for (int c = 0; c < seq.channels && c < 3; ++c)
          out.at(t, m, v, c) -= root[c];
  }
  return out;
}

SkeletonSequence preprocess(const SkeletonSequence& seq, const PreprocessConfig& cfg) {
  cfg.validate();
  SkeletonSequence out = resize_sequence(seq, cfg.target_frames);
  if (cfg.center) out = center_sequence(out, cfg.center_joint);
  return out;
}

}  // namespace skeltk
