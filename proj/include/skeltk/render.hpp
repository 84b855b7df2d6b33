#pragma once

#include <string>
#include <vector>

#include "skeltk/matrix.hpp"
#include "skeltk/topology.hpp"

namespace skeltk {

struct RenderStyle {
  double canvas_width = 480.0;
  double canvas_height = 480.0;
  double margin = 40.0;
  double joint_radius = 4.0;
  double bone_width = 2.5;
  std::string bone_color = "#444444";
  std::string joint_color = "#1f6fb2";
  std::string motion_color = "#2ca02c";
  double motion_opacity = 0.45;
  // motion circle radius = motion_base_radius + motion_radius_scale * magnitude
  double motion_base_radius = 3.0;
  double motion_radius_scale = 12.0;
  double cell_size = 14.0;
  std::string ramp_low = "#f7fbff";
  std::string ramp_high = "#08306b";

  void validate() const;
};

// Single-pose figure: orthographic projection dropping the depth axis, with
// y flipped for screen coordinates and the pose fitted to the canvas. Emits
// one line per bone, one marker per joint, and one motion circle per joint
// with positive magnitude. Numbers are fixed to two decimals so output is
// byte-stable.
std::string render_skeleton_svg(const Matrix& pose,
                                const std::vector<double>* magnitudes,
                                const SkeletalGraph& graph,
                                const RenderStyle& style = {});

// Heatmap of a row-percent matrix (0..100): cell darkness is monotone in the
// value, zero cells are left blank, diagonal cells get an outline. Optional
// labels become per-cell tooltips.
std::string render_confusion_svg(const Matrix& percents,
                                 const std::vector<std::string>& labels = {},
                                 const RenderStyle& style = {});

void write_text_file(const std::string& path, const std::string& text);

}  // namespace skeltk
