#include "skeltk/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>

#include <json.hpp>

#include "skeltk/error.hpp"

namespace skeltk {

using nlohmann::json;

Matrix SkeletalGraph::adjacency() const {
  Matrix a(joint_count, joint_count);
  for (const auto& [i, j] : edges) {
    a.at(i, j) = 1.0;
    a.at(j, i) = 1.0;
  }
  return a;
}

std::vector<int> SkeletalGraph::hop_distances() const {
  std::vector<std::vector<int>> adj(joint_count);
  for (const auto& [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  std::vector<int> dist(joint_count, -1);
  std::deque<int> queue{root_joint};
  dist[root_joint] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int w : adj[u]) {
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

Matrix normalize_adjacency(const Matrix& a) {
  if (a.rows != a.cols)
    throw DimensionError("normalize_adjacency: matrix must be square, got " +
                         std::to_string(a.rows) + "x" + std::to_string(a.cols));
  std::vector<double> inv_sqrt(a.rows, 0.0);
  for (int i = 0; i < a.rows; ++i) {
    double deg = 0.0;
    for (int j = 0; j < a.cols; ++j) {
      if (a.at(i, j) < 0.0)
        throw ValidationError("normalize_adjacency: negative entry at (" +
                              std::to_string(i) + ", " + std::to_string(j) + ")");
      deg += a.at(i, j);
    }
    inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  Matrix out(a.rows, a.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j)
      out.at(i, j) = inv_sqrt[i] * a.at(i, j) * inv_sqrt[j];
  return out;
}

SkeletalGraph build_graph(int joint_count,
                          const std::vector<std::pair<int, int>>& edges,
                          int root_joint) {
  if (joint_count < 1)
    throw ValidationError("graph: joint_count must be >= 1");
  if (root_joint < 0 || root_joint >= joint_count)
    throw ValidationError("graph: root joint out of range");

  SkeletalGraph g;
  g.joint_count = joint_count;
  g.root_joint = root_joint;
  std::set<std::pair<int, int>> seen;
  for (auto [i, j] : edges) {
    if (i < 0 || i >= joint_count || j < 0 || j >= joint_count)
      throw ValidationError("graph: edge (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") out of range");
    if (i == j)
      throw ValidationError("graph: self-loop on joint " + std::to_string(i));
    const auto key = std::minmax(i, j);
    if (!seen.insert(key).second)
      throw ValidationError("graph: duplicate bone (" + std::to_string(i) + ", " +
                            std::to_string(j) + ")");
    g.edges.emplace_back(i, j);
  }

  const std::vector<int> hop = g.hop_distances();
  for (int v = 0; v < joint_count; ++v)
    if (hop[v] < 0)
      throw ValidationError("graph: joint " + std::to_string(v) +
                            " unreachable from root");

  // Spatial partitioning of A + I by hop distance to the root: equal
  // distance (self-loops on a tree), toward the root, away from it.
  Matrix same(joint_count, joint_count);
  Matrix inward(joint_count, joint_count);
  Matrix outward(joint_count, joint_count);
  for (int v = 0; v < joint_count; ++v) same.at(v, v) = 1.0;
  for (const auto& [i, j] : g.edges) {
    // entry (i, j) aggregates from j into i
    if (hop[j] == hop[i]) {
      same.at(i, j) = 1.0;
      same.at(j, i) = 1.0;
    } else if (hop[j] < hop[i]) {
      inward.at(i, j) = 1.0;
      outward.at(j, i) = 1.0;
    } else {
      outward.at(i, j) = 1.0;
      inward.at(j, i) = 1.0;
    }
  }
  g.raw_partitions = {same, inward, outward};
  for (const Matrix& p : g.raw_partitions)
    g.partitions.push_back(normalize_adjacency(p));
  return g;
}

SkeletalGraph build_ntu_graph() {
  // Bones of the 25-joint capture skeleton, 0-based; see docs/ntu_topology.md.
  static const std::vector<std::pair<int, int>> bones = {
      {0, 1},   {1, 20},  {2, 20},  {3, 2},   {4, 20},  {5, 4},
      {6, 5},   {7, 6},   {8, 20},  {9, 8},   {10, 9},  {11, 10},
      {12, 0},  {13, 12}, {14, 13}, {15, 14}, {16, 0},  {17, 16},
      {18, 17}, {19, 18}, {21, 7},  {22, 7},  {23, 11}, {24, 11},
  };
  return build_graph(25, bones, 0);
}

Hypergraph make_hypergraph(int joint_count,
                           std::vector<std::vector<int>> hyperedges,
                           std::vector<double> edge_weights,
                           std::vector<std::string> edge_names) {
  if (joint_count < 1)
    throw ValidationError("hypergraph: joint_count must be >= 1");
  const int e_count = static_cast<int>(hyperedges.size());
  if (edge_weights.empty()) edge_weights.assign(e_count, 1.0);
  if (static_cast<int>(edge_weights.size()) != e_count)
    throw ValidationError("hypergraph: weight count does not match edge count");
  for (double w : edge_weights)
    if (!(w > 0.0))
      throw ValidationError("hypergraph: edge weights must be positive");
  if (edge_names.empty())
    for (int e = 0; e < e_count; ++e)
      edge_names.push_back("edge_" + std::to_string(e));

  Hypergraph hg;
  hg.joint_count = joint_count;
  hg.edge_names = std::move(edge_names);
  hg.edge_weights = std::move(edge_weights);
  hg.incidence = Matrix(joint_count, e_count);
  for (int e = 0; e < e_count; ++e) {
    std::set<int> members;
    for (int v : hyperedges[e]) {
      if (v < 0 || v >= joint_count)
        throw ValidationError("hypergraph: joint " + std::to_string(v) +
                              " out of range in hyperedge " + std::to_string(e));
      if (!members.insert(v).second)
        throw ValidationError("hypergraph: joint " + std::to_string(v) +
                              " duplicated in hyperedge " + std::to_string(e));
      hg.incidence.at(v, e) = 1.0;
    }
  }
  hg.hyperedges = std::move(hyperedges);

  hg.vertex_degree.assign(joint_count, 0.0);
  hg.edge_degree.assign(e_count, 0.0);
  for (int v = 0; v < joint_count; ++v)
    for (int e = 0; e < e_count; ++e) {
      hg.vertex_degree[v] += hg.incidence.at(v, e) * hg.edge_weights[e];
      hg.edge_degree[e] += hg.incidence.at(v, e);
    }
  return hg;
}

Matrix Hypergraph::aggregation_operator() const {
  const int v_count = joint_count;
  const int e_count = static_cast<int>(hyperedges.size());
  std::vector<double> dv_inv_sqrt(v_count, 0.0);
  for (int v = 0; v < v_count; ++v)
    dv_inv_sqrt[v] = vertex_degree[v] > 0.0 ? 1.0 / std::sqrt(vertex_degree[v]) : 0.0;
  std::vector<double> de_inv(e_count, 0.0);
  for (int e = 0; e < e_count; ++e)
    de_inv[e] = edge_degree[e] > 0.0 ? 1.0 / edge_degree[e] : 0.0;

  Matrix g(v_count, v_count);
  for (int e = 0; e < e_count; ++e) {
    const double scale = edge_weights[e] * de_inv[e];
    for (int i : hyperedges[e])
      for (int j : hyperedges[e])
        g.at(i, j) += dv_inv_sqrt[i] * scale * dv_inv_sqrt[j];
  }
  return g;
}

std::vector<std::uint8_t> Hypergraph::same_edge_mask() const {
  std::vector<std::uint8_t> mask(static_cast<size_t>(joint_count) * joint_count, 0);
  for (const std::vector<int>& edge : hyperedges)
    for (int i : edge)
      for (int j : edge)
        mask[static_cast<size_t>(i) * joint_count + j] = 1;
  return mask;
}

namespace {

const std::vector<std::vector<int>>& default_bodypart_edges() {
  static const std::vector<std::vector<int>> parts = {
      {2, 3},                    // head + neck
      {0, 1, 20},                // torso / spine
      {4, 5, 6, 7, 21, 22},      // left arm + hand
      {8, 9, 10, 11, 23, 24},    // right arm + hand
      {12, 13, 14, 15},          // left leg + foot
      {16, 17, 18, 19},          // right leg + foot
  };
  return parts;
}

const std::vector<std::string>& default_bodypart_names() {
  static const std::vector<std::string> names = {
      "head", "torso", "left_arm", "right_arm", "left_leg", "right_leg"};
  return names;
}

}  // namespace

Hypergraph build_bodypart_hypergraph(const std::vector<std::vector<int>>& parts,
                                     const std::vector<std::string>& names) {
  const std::vector<std::vector<int>>& edges =
      parts.empty() ? default_bodypart_edges() : parts;
  const std::vector<std::string>& edge_names =
      parts.empty() && names.empty() ? default_bodypart_names() : names;

  Hypergraph hg = make_hypergraph(25, edges, {}, edge_names);
  for (int v = 0; v < hg.joint_count; ++v)
    if (hg.vertex_degree[v] <= 0.0)
      throw ValidationError("hypergraph: joint " + std::to_string(v) +
                            " not covered by any hyperedge");
  return hg;
}

Matrix hypergraph_aggregate(const Matrix& x, const Hypergraph& hg) {
  if (x.rows != hg.joint_count)
    throw DimensionError("hypergraph_aggregate: feature rows " +
                         std::to_string(x.rows) + " != joint count " +
                         std::to_string(hg.joint_count));
  return matmul(hg.aggregation_operator(), x);
}

Hypergraph parse_hypergraph_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("hypergraph config: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("joint_count") ||
      !doc.at("joint_count").is_number_integer())
    throw ParseError("hypergraph config: missing integer field \"joint_count\"");
  if (!doc.contains("hyperedges") || !doc.at("hyperedges").is_array())
    throw ParseError("hypergraph config: missing array field \"hyperedges\"");

  const int joint_count = doc.at("joint_count").get<int>();
  std::vector<std::vector<int>> edges;
  std::vector<std::string> names;
  for (const json& e : doc.at("hyperedges")) {
    if (!e.is_object() || !e.contains("joints") || !e.at("joints").is_array())
      throw ParseError("hypergraph config: each hyperedge needs a \"joints\" array");
    std::vector<int> joints;
    for (const json& v : e.at("joints")) {
      if (!v.is_number_integer())
        throw ParseError("hypergraph config: joint indices must be integers");
      joints.push_back(v.get<int>());
    }
    edges.push_back(std::move(joints));
    names.push_back(e.contains("name") && e.at("name").is_string()
                        ? e.at("name").get<std::string>()
                        : "edge_" + std::to_string(names.size()));
  }
  std::vector<double> weights;
  if (doc.contains("weights")) {
    if (!doc.at("weights").is_array())
      throw ParseError("hypergraph config: \"weights\" must be an array");
    for (const json& w : doc.at("weights")) {
      if (!w.is_number())
        throw ParseError("hypergraph config: weights must be numbers");
      weights.push_back(w.get<double>());
    }
  }

  Hypergraph hg = make_hypergraph(joint_count, std::move(edges),
                                  std::move(weights), std::move(names));
  for (int v = 0; v < hg.joint_count; ++v)
    if (hg.vertex_degree[v] <= 0.0)
      throw ValidationError("hypergraph config: joint " + std::to_string(v) +
                            " not covered by any hyperedge");
  return hg;
}

Hypergraph load_hypergraph_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open hypergraph config: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_hypergraph_config(text);
}

}  // namespace skeltk
