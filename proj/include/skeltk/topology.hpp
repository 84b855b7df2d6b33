#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "skeltk/matrix.hpp"

namespace skeltk {

// Skeleton tree plus the three spatial partitions used by graph convolution.
// Partition 0 holds same-distance neighbors (on a tree, only self-loops),
// partition 1 neighbors closer to the root (centripetal), partition 2
// neighbors farther from it (centrifugal). raw_partitions sum to A + I;
// partitions are the symmetrically normalized versions actually consumed by
// the models.
struct SkeletalGraph {
  int joint_count = 0;
  std::vector<std::pair<int, int>> edges;  // each bone stored once
  int root_joint = 0;
  std::vector<Matrix> raw_partitions;
  std::vector<Matrix> partitions;

  Matrix adjacency() const;                 // A, symmetric, no self-loops
  std::vector<int> hop_distances() const;   // BFS distance to root_joint
};

// The 25-joint capture-device skeleton: joint semantics and the 24-bone tree
// are documented in docs/ntu_topology.md. Root is the spine base (joint 0).
SkeletalGraph build_ntu_graph();

// Builds the partitioned graph for an arbitrary tree; exposed for tests and
// permutation probes.
SkeletalGraph build_graph(int joint_count,
                          const std::vector<std::pair<int, int>>& edges,
                          int root_joint);

// Symmetric degree normalization D^{-1/2} A D^{-1/2} with row-sum degrees.
// Zero-degree rows/columns map to zero. Negative entries are rejected.
Matrix normalize_adjacency(const Matrix& a);

// Joint groups connected by hyperedges. H is the V x E incidence matrix;
// vertex degrees weight-adjusted row sums, edge degrees plain column sums.
struct Hypergraph {
  int joint_count = 0;
  std::vector<std::string> edge_names;
  std::vector<std::vector<int>> hyperedges;
  std::vector<double> edge_weights;

  Matrix incidence;                   // V x E, binary
  std::vector<double> vertex_degree;  // row sums of H * diag(weights)
  std::vector<double> edge_degree;    // column sums of H

  // Dv^{-1/2} H W De^{-1} H^T Dv^{-1/2}; zero degrees guard to zero.
  Matrix aggregation_operator() const;

  // mask[i*V+j] = 1 iff joints i and j share at least one hyperedge.
  std::vector<std::uint8_t> same_edge_mask() const;
};

// Low-level constructor: populates incidence and degrees from the edge list.
// Joints may be left uncovered here (their rows aggregate to zero); weights
// default to all ones. Out-of-range or duplicated joints are errors.
Hypergraph make_hypergraph(int joint_count,
                           std::vector<std::vector<int>> hyperedges,
                           std::vector<double> edge_weights = {},
                           std::vector<std::string> edge_names = {});

// Anatomical body-part grouping over the 25-joint skeleton (head, torso,
// arms, legs; 6 hyperedges). A custom partition may be supplied; it must
// cover every joint or the build fails naming the uncovered joint.
Hypergraph build_bodypart_hypergraph(
    const std::vector<std::vector<int>>& parts = {},
    const std::vector<std::string>& names = {});

// Applies the aggregation operator to per-joint features (rows = joints).
Matrix hypergraph_aggregate(const Matrix& x, const Hypergraph& hg);

// JSON config: {"joint_count": V, "hyperedges": [{"name": ..., "joints":
// [...]}, ...], "weights": [...] (optional)}. Coverage is enforced.
Hypergraph load_hypergraph_config(const std::filesystem::path& path);
Hypergraph parse_hypergraph_config(const std::string& text);

}  // namespace skeltk
