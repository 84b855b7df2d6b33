#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "skeltk/manifest.hpp"
#include "skeltk/sequence.hpp"

namespace skeltk {

// Generator settings for the desk-scale synthetic dataset. Each class is a
// distinct parametric motion on the 25-joint topology; `noise` scales every
// per-sequence perturbation (phase, amplitude, coordinate jitter), so noise=0
// makes all sequences of a class bitwise identical.
struct SynthSpec {
  std::uint64_t seed = 0;
  int num_classes = 8;
  int sequences_per_class = 16;
  int frames = 48;
  double noise = 0.05;

  void validate() const;  // num_classes >= 2, sequences_per_class >= 1, frames >= 8
};

// The neutral standing pose the motion patterns deform. Row-major V*3.
std::vector<double> synth_base_pose();

// Deterministic generation: sequence k of class c depends only on
// (spec.seed, c, k). Sequences are ordered class-major. subject_id cycles
// 1..4, camera_id 1..3, setup_id 1..2 within each class so every split rule
// has something to key on.
std::vector<SkeletonSequence> synth_generate(const SynthSpec& spec);

// Writes each sequence as JSON under dir (seq_00000.json, ...) plus
// dir/manifest.json, and returns the manifest. Default split: subjects
// {1,2,3} train, {4} test, cross_subject.
DatasetManifest write_synth_dataset(const SynthSpec& spec,
                                    const std::filesystem::path& dir);

}  // namespace skeltk
