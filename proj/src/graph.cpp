#include "fignn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "fignn/error.hpp"

namespace fignn::graph {

namespace {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

double wrap_dx(double dx, double period_x) {
  if (period_x <= 0.0) return dx;
  dx = std::fmod(dx, period_x);
  if (dx > 0.5 * period_x) dx -= period_x;
  if (dx < -0.5 * period_x) dx += period_x;
  return dx;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

EdgeList symmetrize(EdgeList edges) {
  const std::size_t n = edges.size();
  edges.reserve(2 * n);
  for (std::size_t e = 0; e < n; ++e) edges.emplace_back(edges[e].second, edges[e].first);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace

EdgeFeature edge_feature(const Point& from, const Point& to, double period_x) {
  const double dx = wrap_dx(to[0] - from[0], period_x);
  const double dy = to[1] - from[1];
  return {std::sqrt(dx * dx + dy * dy), dx, dy};
}

Graph::Graph(std::vector<Point> coords, EdgeList edges, double period_x)
    : coords_(std::move(coords)), period_x_(period_x) {
  const std::size_t n = coords_.size();
  for (const auto& p : coords_) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw ConfigError("Graph: non-finite coordinate");
  }
  std::sort(edges.begin(), edges.end());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    if (i >= n || j >= n) {
      throw IndexError("Graph: edge (" + std::to_string(i) + "," + std::to_string(j) +
                       ") references a node outside [0," + std::to_string(n) + ")");
    }
    if (i == j) throw ContractError("Graph: self-loop at node " + std::to_string(i));
    if (e > 0 && edges[e - 1] == edges[e]) {
      throw ContractError("Graph: duplicate edge (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  for (const auto& [i, j] : edges) {
    if (!std::binary_search(edges.begin(), edges.end(), std::make_pair(j, i))) {
      throw ContractError("Graph: edge (" + std::to_string(i) + "," + std::to_string(j) +
                          ") has no reverse");
    }
  }
  src_.reserve(edges.size());
  dst_.reserve(edges.size());
  feats_.reserve(edges.size());
  std::vector<double> flat;
  flat.reserve(edges.size() * 3);
  for (const auto& [i, j] : edges) {
    src_.push_back(i);
    dst_.push_back(j);
    feats_.push_back(edge_feature(coords_[i], coords_[j], period_x_));
    flat.insert(flat.end(), feats_.back().begin(), feats_.back().end());
  }
  feat_tensor_ = ad::Tensor::from({edges.size(), 3}, std::move(flat));
}

EdgeList Graph::edges() const {
  EdgeList out;
  out.reserve(src_.size());
  for (std::size_t e = 0; e < src_.size(); ++e) out.emplace_back(src_[e], dst_[e]);
  return out;
}

bool Graph::has_edge(std::size_t i, std::size_t j) const {
  // Edges are sorted by (src, dst).
  auto lo = std::lower_bound(src_.begin(), src_.end(), i);
  auto hi = std::upper_bound(lo, src_.end(), i);
  const auto first = static_cast<std::size_t>(lo - src_.begin());
  const auto last = static_cast<std::size_t>(hi - src_.begin());
  return std::binary_search(dst_.begin() + static_cast<std::ptrdiff_t>(first),
                            dst_.begin() + static_cast<std::ptrdiff_t>(last), j);
}

double Graph::char_length() const {
  std::vector<double> lengths;
  lengths.reserve(feats_.size());
  for (const auto& f : feats_) lengths.push_back(f[0]);
  return median(std::move(lengths));
}

Graph build_knn_graph(const std::vector<Point>& coords, std::size_t k, double period_x) {
  const std::size_t n = coords.size();
  if (k < 1 || k >= n) {
    throw ConfigError("build_knn_graph: need 1 <= k < N, got k=" + std::to_string(k) +
                      ", N=" + std::to_string(n));
  }
  EdgeList edges;
  edges.reserve(n * k);
  std::vector<std::pair<double, std::size_t>> cand(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = wrap_dx(coords[j][0] - coords[i][0], period_x);
      const double dy = coords[j][1] - coords[i][1];
      cand[c++] = {dx * dx + dy * dy, j};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    for (std::size_t q = 0; q < k; ++q) edges.emplace_back(i, cand[q].second);
  }
  return Graph(coords, symmetrize(std::move(edges)), period_x);
}

Graph build_mesh_graph(const std::vector<Point>& cell_centroids, const EdgeList& face_pairs) {
  const std::size_t n = cell_centroids.size();
  EdgeList edges;
  edges.reserve(face_pairs.size());
  for (const auto& [i, j] : face_pairs) {
    if (i >= n || j >= n) {
      throw IndexError("build_mesh_graph: face (" + std::to_string(i) + "," + std::to_string(j) +
                       ") references a cell outside [0," + std::to_string(n) + ")");
    }
    if (i == j) throw ContractError("build_mesh_graph: self-pair at cell " + std::to_string(i));
    edges.emplace_back(i, j);
  }
  return Graph(cell_centroids, symmetrize(std::move(edges)));
}

Graph pooled_subgraph(const Graph& g, const ad::Index& keep) {
  if (keep.empty()) throw ConfigError("pooled_subgraph: empty keep set");
  const std::size_t n = g.num_nodes();
  constexpr std::size_t kDropped = static_cast<std::size_t>(-1);
  std::vector<std::size_t> remap(n, kDropped);
  std::vector<Point> coords;
  coords.reserve(keep.size());
  for (std::size_t q = 0; q < keep.size(); ++q) {
    if (keep[q] >= n) {
      throw IndexError("pooled_subgraph: index " + std::to_string(keep[q]) + " out of range [0," +
                       std::to_string(n) + ")");
    }
    if (remap[keep[q]] != kDropped) {
      throw ContractError("pooled_subgraph: duplicate keep index " + std::to_string(keep[q]));
    }
    remap[keep[q]] = q;
    coords.push_back(g.coords()[keep[q]]);
  }
  EdgeList edges;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const std::size_t a = remap[g.src()[e]];
    const std::size_t b = remap[g.dst()[e]];
    if (a != kDropped && b != kDropped) edges.emplace_back(a, b);
  }
  return Graph(std::move(coords), std::move(edges), g.period_x());
}

namespace {

CoarseLevel coarsen_impl(const Graph& g, double fine_length, double target_factor) {
  const std::size_t n = g.num_nodes();
  if (n == 0) throw ContractError("coarsen: empty graph");
  if (!(target_factor > 0.0)) throw ConfigError("coarsen: target_factor must be positive");
  CoarseLevel level;
  const double side = target_factor * fine_length;
  level.cell_size = side;

  if (n == 1 || g.num_edges() == 0 || !(side > 0.0)) {
    // Degenerate: everything in one cluster, no edges.
    Point c{0.0, 0.0};
    for (const auto& p : g.coords()) {
      c[0] += p[0];
      c[1] += p[1];
    }
    c[0] /= static_cast<double>(n);
    c[1] /= static_cast<double>(n);
    level.parent_of.assign(n, 0);
    level.graph = Graph({c}, {}, g.period_x());
    level.char_length = side;
    return level;
  }

  double x0 = g.coords()[0][0], y0 = g.coords()[0][1];
  for (const auto& p : g.coords()) {
    x0 = std::min(x0, p[0]);
    y0 = std::min(y0, p[1]);
  }
  std::vector<std::pair<long long, long long>> cell(n);  // (row, col)
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = g.coords()[i];
    cell[i] = {static_cast<long long>(std::floor((p[1] - y0) / side)),
               static_cast<long long>(std::floor((p[0] - x0) / side))};
  }
  std::map<std::pair<long long, long long>, std::size_t> ids;
  for (const auto& c : cell) ids.emplace(c, 0);
  std::size_t next = 0;
  for (auto& [key, id] : ids) id = next++;

  const std::size_t m = ids.size();
  level.parent_of.resize(n);
  std::vector<Point> centroid(m, Point{0.0, 0.0});
  std::vector<double> count(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = ids.at(cell[i]);
    level.parent_of[i] = a;
    centroid[a][0] += g.coords()[i][0];
    centroid[a][1] += g.coords()[i][1];
    count[a] += 1.0;
  }
  for (std::size_t a = 0; a < m; ++a) {
    centroid[a][0] /= count[a];
    centroid[a][1] /= count[a];
  }
  EdgeList edges;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const std::size_t a = level.parent_of[g.src()[e]];
    const std::size_t b = level.parent_of[g.dst()[e]];
    if (a != b) edges.emplace_back(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  level.graph = Graph(std::move(centroid), std::move(edges), g.period_x());
  level.char_length = level.graph.num_edges() > 0 ? level.graph.char_length() : side;
  return level;
}

}  // namespace

CoarseLevel coarsen(const Graph& g, double target_factor) {
  return coarsen_impl(g, g.char_length(), target_factor);
}

CoarseLevel coarsen(const CoarseLevel& level, double target_factor) {
  return coarsen_impl(level.graph, level.char_length, target_factor);
}

Hierarchy build_hierarchy(const Graph& g, std::size_t levels, double target_factor) {
  Hierarchy h;
  h.fine_nodes = g.num_nodes();
  ad::Index composed(g.num_nodes());
  for (std::size_t i = 0; i < composed.size(); ++i) composed[i] = i;
  for (std::size_t l = 0; l < levels; ++l) {
    CoarseLevel next = l == 0 ? coarsen(g, target_factor) : coarsen(h.levels.back(), target_factor);
    for (auto& p : composed) p = next.parent_of[p];
    h.fine_parent.push_back(composed);
    h.levels.push_back(std::move(next));
  }
  return h;
}

}  // namespace fignn::graph
