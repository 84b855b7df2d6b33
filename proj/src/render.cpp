#include "skeltk/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "skeltk/error.hpp"

namespace skeltk {

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Rgb {
  int r = 0, g = 0, b = 0;
};

Rgb parse_hex_color(const std::string& text) {
  if (text.size() != 7 || text[0] != '#')
    throw ValidationError("render: bad color \"" + text + "\"");
  auto hex = [&](int pos) {
    int value = 0;
    for (int i = 0; i < 2; ++i) {
      char ch = text[pos + i];
      int digit;
      if (ch >= '0' && ch <= '9') digit = ch - '0';
      else if (ch >= 'a' && ch <= 'f') digit = ch - 'a' + 10;
      else if (ch >= 'A' && ch <= 'F') digit = ch - 'A' + 10;
      else throw ValidationError("render: bad color \"" + text + "\"");
      value = value * 16 + digit;
    }
    return value;
  };
  return {hex(1), hex(3), hex(5)};
}

std::string mix_colors(const Rgb& low, const Rgb& high, double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [&](int a, int b) {
    return static_cast<int>(std::lround(a + (b - a) * t));
  };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(low.r, high.r),
                mix(low.g, high.g), mix(low.b, high.b));
  return buf;
}

std::string svg_open(double width, double height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed2(width) +
         "\" height=\"" + fixed2(height) + "\" viewBox=\"0 0 " + fixed2(width) +
         " " + fixed2(height) + "\">\n";
}

}  // namespace

void RenderStyle::validate() const {
  if (canvas_width <= 0 || canvas_height <= 0)
    throw ValidationError("render style: canvas size must be positive");
  if (margin < 0) throw ValidationError("render style: margin must be >= 0");
  if (joint_radius <= 0 || bone_width <= 0)
    throw ValidationError("render style: joint radius and bone width must be positive");
  if (motion_base_radius <= 0 || motion_radius_scale <= 0)
    throw ValidationError("render style: motion radius terms must be positive");
  if (cell_size <= 0)
    throw ValidationError("render style: cell size must be positive");
}

std::string render_skeleton_svg(const Matrix& pose,
                                const std::vector<double>* magnitudes,
                                const SkeletalGraph& graph,
                                const RenderStyle& style) {
  style.validate();
  if (pose.cols < 2)
    throw DimensionError("render: pose needs at least 2 coordinate columns");
  if (pose.rows != graph.joint_count)
    throw DimensionError("render: pose has " + std::to_string(pose.rows) +
                         " joints but the graph expects " +
                         std::to_string(graph.joint_count));
  if (magnitudes && static_cast<int>(magnitudes->size()) != pose.rows)
    throw DimensionError("render: magnitude count " +
                         std::to_string(magnitudes->size()) +
                         " does not match joint count");

  const int joints = pose.rows;
  std::vector<double> px(joints), py(joints);
  for (int j = 0; j < joints; ++j) {
    const double x = pose.at(j, 0);
    const double y = pose.at(j, 1);
    if (!std::isfinite(x) || !std::isfinite(y) ||
        (pose.cols > 2 && !std::isfinite(pose.at(j, 2))))
      throw ValidationError("render: joint " + std::to_string(j) +
                            " has a non-finite coordinate");
    if (magnitudes && (!std::isfinite((*magnitudes)[j]) || (*magnitudes)[j] < 0))
      throw ValidationError("render: joint " + std::to_string(j) +
                            " has a bad motion magnitude");
    px[j] = x;
    py[j] = -y;  // screen y grows downward
  }

  double min_x = px[0], max_x = px[0], min_y = py[0], max_y = py[0];
  for (int j = 1; j < joints; ++j) {
    min_x = std::min(min_x, px[j]);
    max_x = std::max(max_x, px[j]);
    min_y = std::min(min_y, py[j]);
    max_y = std::max(max_y, py[j]);
  }
  const double span_x = max_x - min_x;
  const double span_y = max_y - min_y;
  const double avail_x = style.canvas_width - 2 * style.margin;
  const double avail_y = style.canvas_height - 2 * style.margin;
  double zoom = 1.0;
  if (span_x > 0 || span_y > 0) {
    zoom = std::min(span_x > 0 ? avail_x / span_x : avail_y / std::max(span_y, 1e-300),
                    span_y > 0 ? avail_y / span_y : avail_x / std::max(span_x, 1e-300));
  }
  const double off_x =
      style.canvas_width / 2 - zoom * (min_x + span_x / 2);
  const double off_y =
      style.canvas_height / 2 - zoom * (min_y + span_y / 2);
  auto sx = [&](int j) { return zoom * px[j] + off_x; };
  auto sy = [&](int j) { return zoom * py[j] + off_y; };

  std::string out = svg_open(style.canvas_width, style.canvas_height);
  for (const auto& [a, b] : graph.edges) {
    out += "  <line class=\"bone\" x1=\"" + fixed2(sx(a)) + "\" y1=\"" +
           fixed2(sy(a)) + "\" x2=\"" + fixed2(sx(b)) + "\" y2=\"" +
           fixed2(sy(b)) + "\" stroke=\"" + style.bone_color +
           "\" stroke-width=\"" + fixed2(style.bone_width) + "\"/>\n";
  }
  for (int j = 0; j < joints; ++j) {
    out += "  <circle class=\"joint\" cx=\"" + fixed2(sx(j)) + "\" cy=\"" +
           fixed2(sy(j)) + "\" r=\"" + fixed2(style.joint_radius) +
           "\" fill=\"" + style.joint_color + "\"/>\n";
  }
  if (magnitudes) {
    for (int j = 0; j < joints; ++j) {
      const double mag = (*magnitudes)[j];
      if (mag <= 0) continue;
      const double radius =
          style.motion_base_radius + style.motion_radius_scale * mag;
      out += "  <circle class=\"motion\" cx=\"" + fixed2(sx(j)) + "\" cy=\"" +
             fixed2(sy(j)) + "\" r=\"" + fixed2(radius) + "\" fill=\"" +
             style.motion_color + "\" fill-opacity=\"" +
             fixed2(style.motion_opacity) + "\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

std::string render_confusion_svg(const Matrix& percents,
                                 const std::vector<std::string>& labels,
                                 const RenderStyle& style) {
  style.validate();
  if (percents.rows != percents.cols)
    throw DimensionError("render: confusion matrix must be square, got " +
                         std::to_string(percents.rows) + "x" +
                         std::to_string(percents.cols));
  if (!labels.empty() && static_cast<int>(labels.size()) != percents.rows)
    throw DimensionError("render: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(percents.rows) +
                         " classes");

  const int n = percents.rows;
  const double grid = n * style.cell_size;
  const double width = grid + 2 * style.margin;
  const double height = grid + 2 * style.margin;
  const Rgb low = parse_hex_color(style.ramp_low);
  const Rgb high = parse_hex_color(style.ramp_high);

  std::string out = svg_open(width, height);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double value = percents.at(r, c);
      if (!std::isfinite(value) || value < 0)
        throw ValidationError("render: bad percent at (" + std::to_string(r) +
                              ", " + std::to_string(c) + ")");
      if (value == 0.0) continue;
      const double x = style.margin + c * style.cell_size;
      const double y = style.margin + r * style.cell_size;
      out += "  <rect class=\"cell\" x=\"" + fixed2(x) + "\" y=\"" + fixed2(y) +
             "\" width=\"" + fixed2(style.cell_size) + "\" height=\"" +
             fixed2(style.cell_size) + "\" fill=\"" +
             mix_colors(low, high, value / 100.0) + "\"";
      if (r == c) out += " stroke=\"#000000\" stroke-width=\"0.5\"";
      if (!labels.empty()) {
        out += "><title>" + escape_xml(labels[r]) + " as " +
               escape_xml(labels[c]) + ": " + fixed2(value) + "%</title></rect>\n";
      } else {
        out += "/>\n";
      }
    }
  }
  out += "</svg>\n";
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write \"" + path + "\"");
  out << text;
}

}  // namespace skeltk
