#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "fignn/autodiff.hpp"

namespace fignn::graph {

using Point = std::array<double, 2>;
using EdgeFeature = std::array<double, 3>;  // [d_euc, dx, dy]

/// Static graph over planar points. Edges are directed, stored sorted by
/// (src, dst), and always come in reverse pairs.
class Graph {
 public:
  Graph() = default;
  /// Builds from coordinates and a directed edge list. Edges are sorted and
  /// features are computed; the list must be symmetric without self-loops or
  /// duplicates (ContractError otherwise). A positive `period_x` measures
  /// x-offsets with the minimum image (periodic longitude); 0 disables it.
  Graph(std::vector<Point> coords, std::vector<std::pair<std::size_t, std::size_t>> edges,
        double period_x = 0.0);

  std::size_t num_nodes() const noexcept { return coords_.size(); }
  std::size_t num_edges() const noexcept { return src_.size(); }
  const std::vector<Point>& coords() const noexcept { return coords_; }
  const ad::Index& src() const noexcept { return src_; }
  const ad::Index& dst() const noexcept { return dst_; }
  const std::vector<EdgeFeature>& edge_features() const noexcept { return feats_; }
  /// Edge features as a constant E x 3 tensor.
  const ad::Tensor& edge_feature_tensor() const noexcept { return feat_tensor_; }

  std::vector<std::pair<std::size_t, std::size_t>> edges() const;
  bool has_edge(std::size_t i, std::size_t j) const;

  /// Median edge length; 0 for an edgeless graph.
  double char_length() const;
  double period_x() const noexcept { return period_x_; }

 private:
  std::vector<Point> coords_;
  double period_x_ = 0.0;
  ad::Index src_;
  ad::Index dst_;
  std::vector<EdgeFeature> feats_;
  ad::Tensor feat_tensor_;
};

EdgeFeature edge_feature(const Point& from, const Point& to, double period_x = 0.0);

/// k nearest neighbours per node (self excluded, ties to the lower index),
/// symmetrised and deduplicated.
Graph build_knn_graph(const std::vector<Point>& coords, std::size_t k, double period_x = 0.0);

/// One undirected edge per shared cell face.
Graph build_mesh_graph(const std::vector<Point>& cell_centroids,
                       const std::vector<std::pair<std::size_t, std::size_t>>& face_pairs);

/// Nodes restricted to `keep` (in the given order), with the edges whose two
/// endpoints survive. Features are inherited from the parent graph.
Graph pooled_subgraph(const Graph& g, const ad::Index& keep);

struct CoarseLevel {
  ad::Index parent_of;  // previous-level node -> cluster
  Graph graph;          // cluster centroids + induced edges
  double char_length = 0.0;
  double cell_size = 0.0;

  std::size_t num_clusters() const noexcept { return graph.num_nodes(); }
};

/// Square-cell binning at side target_factor * char_length(g). Cluster ids
/// are ordered by (cell row, cell column), so they do not depend on node
/// order.
CoarseLevel coarsen(const Graph& g, double target_factor = 2.0);
CoarseLevel coarsen(const CoarseLevel& level, double target_factor = 2.0);

/// Stack of coarsening levels over a fine graph. Level l coarsens level l-1.
struct Hierarchy {
  std::vector<CoarseLevel> levels;
  std::vector<ad::Index> fine_parent;  // fine node -> cluster at each level
  std::size_t fine_nodes = 0;

  std::size_t size() const noexcept { return levels.size(); }
};

Hierarchy build_hierarchy(const Graph& g, std::size_t levels, double target_factor = 2.0);

}  // namespace fignn::graph
