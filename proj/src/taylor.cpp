#include "skeltk/taylor.hpp"

#include <cmath>

#include "skeltk/error.hpp"

namespace skeltk {

std::string to_string(TaylorMode mode) {
  return mode == TaylorMode::replace ? "replace" : "concat";
}

TaylorMode taylor_mode_from_string(const std::string& s) {
  if (s == "replace") return TaylorMode::replace;
  if (s == "concat") return TaylorMode::concat;
  throw ValidationError("taylor: unknown mode \"" + s + "\"");
}

void TaylorConfig::validate() const {
  if (block_frames < 2)
    throw ValidationError("taylor: block_frames must be >= 2");
  if (step < 1) throw ValidationError("taylor: step must be >= 1");
  if (order < 1 || order > block_frames - 1)
    throw ValidationError("taylor: order must be in [1, block_frames-1], got " +
                          std::to_string(order) + " with block_frames " +
                          std::to_string(block_frames));
}

SkeletonSequence forward_differences(const SkeletonSequence& seq, int n) {
  if (n < 1) throw ValidationError("forward_differences: order must be >= 1");
  if (seq.frames <= n)
    throw ValidationError("forward_differences: need more than " +
                          std::to_string(n) + " frames, got " +
                          std::to_string(seq.frames));
  SkeletonSequence cur = seq;
  for (int round = 0; round < n; ++round) {
    SkeletonSequence next = cur;
    next.frames = cur.frames - 1;
    next.data.resize(static_cast<size_t>(next.value_count()));
    const std::int64_t stride = static_cast<std::int64_t>(cur.bodies) *
                                cur.joints * cur.channels;
    for (int t = 0; t + 1 < cur.frames; ++t)
      for (std::int64_t i = 0; i < stride; ++i)
        next.data[t * stride + i] =
            cur.data[(t + 1) * stride + i] - cur.data[t * stride + i];
    cur = std::move(next);
  }
  return cur;
}

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

int block_count(int frames, const TaylorConfig& cfg) {
  if (frames < cfg.block_frames)
    throw ValidationError("taylor: need at least " +
                          std::to_string(cfg.block_frames) + " frames, got " +
                          std::to_string(frames));
  return (frames - cfg.block_frames) / cfg.step + 1;
}

// Mean order-n forward difference of one coordinate track over the block
// starting at t0: offsets u in [t0, t0 + B-1-n], each D^n computed from the
// alternating binomial sum over x[u..u+n].
double block_mean_difference(const SkeletonSequence& seq, int t0, int n,
                             const TaylorConfig& cfg, int m, int v, int c) {
  const int count = cfg.block_frames - n;
  double acc = 0.0;
  for (int u = t0; u < t0 + count; ++u) {
    double d = 0.0;
    double binom = 1.0;  // C(n, i), updated incrementally
    for (int i = 0; i <= n; ++i) {
      const double sign = ((n - i) % 2 == 0) ? 1.0 : -1.0;
      d += sign * binom * seq.at(u + i, m, v, c);
      binom = binom * (n - i) / (i + 1);
    }
    acc += d;
  }
  return acc / count;
}

}  // namespace

SkeletonSequence taylor_transform(const SkeletonSequence& seq,
                                  const TaylorConfig& cfg) {
  cfg.validate();
  const int out_frames = block_count(seq.frames, cfg);
  const bool concat = cfg.mode == TaylorMode::concat;

  SkeletonSequence out = seq;
  out.frames = out_frames;
  out.channels = concat ? 2 * seq.channels : seq.channels;
  out.data.assign(static_cast<size_t>(out.value_count()), 0.0);

  for (int b = 0; b < out_frames; ++b) {
    const int t0 = b * cfg.step;
    for (int m = 0; m < seq.bodies; ++m) {
      for (int v = 0; v < seq.joints; ++v) {
        for (int c = 0; c < seq.channels; ++c) {
          double disp = 0.0;
          for (int n = 1; n <= cfg.order; ++n)
            disp += block_mean_difference(seq, t0, n, cfg, m, v, c) / factorial(n);
          const double x = seq.at(t0, m, v, c);
          if (concat) {
            out.at(b, m, v, c) = x;
            out.at(b, m, v, c + seq.channels) = disp;
          } else {
            out.at(b, m, v, c) = x + disp;
          }
        }
      }
    }
  }
  return out;
}

MotionField motion_magnitude(const SkeletonSequence& seq, const TaylorConfig& cfg) {
  cfg.validate();
  const int out_frames = block_count(seq.frames, cfg);

  MotionField field;
  field.frames = out_frames;
  field.bodies = seq.bodies;
  field.joints = seq.joints;
  field.source_id = seq.source_id;
  field.magnitudes.assign(
      static_cast<size_t>(out_frames) * seq.bodies * seq.joints, 0.0);

  for (int b = 0; b < out_frames; ++b) {
    const int t0 = b * cfg.step;
    for (int m = 0; m < seq.bodies; ++m) {
      for (int v = 0; v < seq.joints; ++v) {
        double sq = 0.0;
        for (int c = 0; c < seq.channels; ++c) {
          const double d = block_mean_difference(seq, t0, 1, cfg, m, v, c);
          sq += d * d;
        }
        field.at(b, m, v) = std::sqrt(sq);
      }
    }
  }
  return field;
}

}  // namespace skeltk
