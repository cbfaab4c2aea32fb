#pragma once
// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls the library's tensor ops: everything is written
// with plain loops over std::vector so it can check the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fignn/autodiff.hpp"
#include "fignn/graph.hpp"
#include "fignn/model.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using fignn::ad::Tensor;

inline Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

// ---- finite differences ----------------------------------------------------

struct GradCheck {
  double max_rel = 0.0;
  double max_abs = 0.0;
  std::size_t checked = 0;
};

/// Central differences of `loss` w.r.t. every entry of every tensor in
/// `params` against the tape gradient. Relative error uses
/// |a - n| / max(|a|, |n|, floor).
inline GradCheck check_gradients(const std::function<Tensor()>& loss, std::vector<Tensor> params, double h = 1e-5,
                                 double floor = 1e-6) {
  for (auto& p : params) p.zero_grad();
  {
    fignn::ad::Tape tape;
    fignn::ad::TapeScope scope(tape);
    const Tensor l = loss();
    tape.backward(l);
  }
  GradCheck out;
  for (auto& p : params) {
    const std::vector<double> analytic = p.grad();
    auto d = p.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double x0 = d[i];
      d[i] = x0 + h;
      const double up = loss().item();
      d[i] = x0 - h;
      const double dn = loss().item();
      d[i] = x0;
      const double num = (up - dn) / (2.0 * h);
      const double abs = std::abs(num - analytic[i]);
      const double rel = abs / std::max({std::abs(num), std::abs(analytic[i]), floor});
      out.max_abs = std::max(out.max_abs, abs);
      out.max_rel = std::max(out.max_rel, rel);
      ++out.checked;
    }
  }
  return out;
}

// ---- graphs ----------------------------------------------------------------

/// All-pairs k-NN: sort every other node by (distance, index).
inline std::set<std::pair<std::size_t, std::size_t>> knn_edges(const std::vector<fignn::graph::Point>& pts,
                                                               std::size_t k) {
  std::set<std::pair<std::size_t, std::size_t>> e;
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = pts[j][0] - pts[i][0], dy = pts[j][1] - pts[i][1];
      d.emplace_back(dx * dx + dy * dy, j);
    }
    std::sort(d.begin(), d.end());
    for (std::size_t r = 0; r < k; ++r) {
      e.insert({i, d[r].second});
      e.insert({d[r].second, i});
    }
  }
  return e;
}

inline std::set<std::pair<std::size_t, std::size_t>> edge_set(const fignn::graph::Graph& g) {
  std::set<std::pair<std::size_t, std::size_t>> s;
  for (std::size_t e = 0; e < g.num_edges(); ++e) s.insert({g.src()[e], g.dst()[e]});
  return s;
}

/// Edges of g with both ends kept, relabelled by position in `keep`.
inline std::set<std::pair<std::size_t, std::size_t>> filtered_edges(const fignn::graph::Graph& g,
                                                                    const std::vector<std::size_t>& keep) {
  std::map<std::size_t, std::size_t> pos;
  for (std::size_t i = 0; i < keep.size(); ++i) pos[keep[i]] = i;
  std::set<std::pair<std::size_t, std::size_t>> s;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    auto a = pos.find(g.src()[e]), b = pos.find(g.dst()[e]);
    if (a != pos.end() && b != pos.end()) s.insert({a->second, b->second});
  }
  return s;
}

// ---- Top-K and budgets -----------------------------------------------------

/// Full sort by (score desc, index asc), first K, then ascending.
inline std::vector<std::size_t> topk(const std::vector<double>& s, std::size_t rf) {
  const std::size_t k = std::max<std::size_t>(1, s.size() / rf);
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline double budget_value(const std::vector<double>& pred, const std::vector<double>& target,
                           const std::vector<std::size_t>& keep) {
  double acc = 0.0;
  for (std::size_t i : keep) acc += (pred[i] - target[i]) * (pred[i] - target[i]);
  return acc / static_cast<double>(keep.size());
}

inline double budget_fraction(const std::vector<double>& err_sq, const std::vector<std::size_t>& keep) {
  double total = 0.0, in = 0.0;
  for (double e : err_sq) total += e;
  for (std::size_t i : keep) in += err_sq[i];
  return total > 0.0 ? in / total : 0.0;
}

/// MSE plus lambda times the summed reciprocal budgets, written out directly.
inline double fignn_loss(const Mat& pred, const Mat& target, const std::vector<std::vector<std::size_t>>& masks,
                         double lambda, double eps) {
  const std::size_t n = pred.size(), nf = pred[0].size();
  double mse = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < nf; ++f) mse += (pred[i][f] - target[i][f]) * (pred[i][f] - target[i][f]);
  mse /= static_cast<double>(n * nf);
  double pen = 0.0;
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<double> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = pred[i][f];
      t[i] = target[i][f];
    }
    pen += 1.0 / (budget_value(p, t, masks[f]) + eps);
  }
  return lambda > 0.0 ? mse + lambda * pen : mse;
}

// ---- straight-line forward -------------------------------------------------

/// Parameters looked up by manifest name.
class Params {
 public:
  explicit Params(fignn::model::FignnModel& m) {
    for (auto& p : m.parameters()) map_.emplace(p.name, to_mat(p.tensor));
  }
  const Mat& operator()(const std::string& name) const { return map_.at(name); }
  bool has(const std::string& name) const { return map_.count(name) > 0; }

 private:
  std::map<std::string, Mat> map_;
};

inline double act(double x) { return x >= 0 ? x : x / (1.0 - x); }

inline Mat affine(const Mat& x, const Mat& w, const Mat& b) {
  Mat y(x.size(), std::vector<double>(w[0].size(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < w[0].size(); ++j) {
      double acc = b[0][j];
      for (std::size_t k = 0; k < w.size(); ++k) acc += x[i][k] * w[k][j];
      y[i][j] = acc;
    }
  return y;
}

inline Mat apply_act(Mat x) {
  for (auto& r : x)
    for (double& v : r) v = act(v);
  return x;
}

inline Mat mlp(const Params& p, const std::string& prefix, Mat x) {
  for (std::size_t l = 0; p.has(prefix + "." + std::to_string(l) + ".weight"); ++l) {
    if (l > 0) x = apply_act(x);
    const std::string q = prefix + "." + std::to_string(l);
    x = affine(x, p(q + ".weight"), p(q + ".bias"));
  }
  return x;
}

inline Mat concat(const Mat& a, const Mat& b) {
  Mat c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c[i].insert(c[i].end(), b[i].begin(), b[i].end());
  return c;
}

inline Mat stack_rows(const Mat& a, const Mat& b) {
  Mat w = a;
  w.insert(w.end(), b.begin(), b.end());
  return w;
}

/// One message-passing layer with the concatenated first-layer weights
/// [w_src; w_dst; w_attr] and [w_self; w_agg].
inline Mat mp_layer(const Params& p, const std::string& prefix, const Mat& h, const fignn::graph::Graph& g) {
  const std::size_t n = h.size(), d = h[0].size();
  Mat edge_in;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    std::vector<double> row = h[g.src()[e]];
    row.insert(row.end(), h[g.dst()[e]].begin(), h[g.dst()[e]].end());
    const auto& f = g.edge_features()[e];
    row.insert(row.end(), f.begin(), f.end());
    edge_in.push_back(row);
  }
  const Mat w_edge = stack_rows(stack_rows(p(prefix + ".edge.0.w_src"), p(prefix + ".edge.0.w_dst")),
                                p(prefix + ".edge.0.w_attr"));
  Mat agg(n, std::vector<double>(d, 0.0));
  if (!edge_in.empty()) {
    Mat msg = affine(edge_in, w_edge, p(prefix + ".edge.0.bias"));
    if (p.has(prefix + ".edge.rest.0.weight")) msg = mlp(p, prefix + ".edge.rest", apply_act(msg));
    std::vector<double> cnt(n, 0.0);
    for (std::size_t e = 0; e < msg.size(); ++e) {
      const std::size_t t = g.dst()[e];
      cnt[t] += 1.0;
      for (std::size_t j = 0; j < d; ++j) agg[t][j] += msg[e][j];
    }
    for (std::size_t i = 0; i < n; ++i)
      if (cnt[i] > 0)
        for (double& v : agg[i]) v /= cnt[i];
  }
  const Mat w_node = stack_rows(p(prefix + ".node.0.w_self"), p(prefix + ".node.0.w_agg"));
  Mat upd = affine(concat(h, agg), w_node, p(prefix + ".node.0.bias"));
  if (p.has(prefix + ".node.rest.0.weight")) upd = mlp(p, prefix + ".node.rest", apply_act(upd));
  Mat out = h;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i][j] += upd[i][j];
  return out;
}

inline Mat processor(const Params& p, const fignn::model::GraphContext& ctx, std::size_t cycles, std::size_t layers,
                     Mat h) {
  const std::size_t d = h[0].size();
  for (std::size_t c = 0; c < cycles; ++c) {
    const std::string q = "processor.cycle" + std::to_string(c);
    for (std::size_t l = 0; l < layers; ++l) h = mp_layer(p, q + ".fine" + std::to_string(l), h, ctx.graph);
    const auto& parent = ctx.hierarchy.fine_parent[c];
    const auto& level = ctx.hierarchy.levels[c];
    const std::size_t m = level.num_clusters();
    Mat hc(m, std::vector<double>(d, 0.0));
    std::vector<double> cnt(m, 0.0);
    for (std::size_t i = 0; i < h.size(); ++i) {
      cnt[parent[i]] += 1.0;
      for (std::size_t j = 0; j < d; ++j) hc[parent[i]][j] += h[i][j];
    }
    for (std::size_t a = 0; a < m; ++a)
      for (double& v : hc[a]) v /= cnt[a];
    for (std::size_t l = 0; l < layers; ++l) hc = mp_layer(p, q + ".coarse" + std::to_string(l), hc, level.graph);
    for (std::size_t i = 0; i < h.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) h[i][j] += hc[parent[i]][j];
  }
  return h;
}

struct BranchOut {
  std::vector<double> channel;
  std::vector<std::size_t> keep;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline BranchOut branch(const Params& p, std::size_t f, const fignn::graph::Graph& g, const Mat& h, std::size_t rf,
                        std::size_t l_down, std::size_t l_up) {
  const std::string q = "branch" + std::to_string(f);
  const Mat& w = p(q + ".w");
  const std::size_t n = h.size(), d = h[0].size();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += h[i][j] * w[j][0];
    s[i] = sigmoid(z);
  }
  BranchOut out;
  out.keep = topk(s, rf);
  Mat pooled;
  for (std::size_t i : out.keep) {
    std::vector<double> row = h[i];
    for (double& v : row) v *= s[i];
    pooled.push_back(row);
  }
  std::vector<fignn::graph::Point> sub_pts;
  for (std::size_t i : out.keep) sub_pts.push_back(g.coords()[i]);
  const auto sub_e = filtered_edges(g, out.keep);
  const fignn::graph::Graph sub(sub_pts, {sub_e.begin(), sub_e.end()}, g.period_x());
  for (std::size_t l = 0; l < l_down; ++l) pooled = mp_layer(p, q + ".down" + std::to_string(l), pooled, sub);
  Mat ht = h;
  for (std::size_t r = 0; r < out.keep.size(); ++r)
    for (std::size_t j = 0; j < d; ++j) ht[out.keep[r]][j] += pooled[r][j];
  for (std::size_t l = 0; l < l_up; ++l) ht = mp_layer(p, q + ".up" + std::to_string(l), ht, g);
  const Mat dec = mlp(p, "decoder", ht);
  for (const auto& row : dec) out.channel.push_back(row[f]);
  return out;
}

/// Full FIGNN step x + [channel_0 .. channel_{F-1}].
inline Mat fignn_step(fignn::model::FignnModel& m, const fignn::model::GraphContext& ctx, const Mat& x,
                      std::vector<std::vector<std::size_t>>* masks = nullptr) {
  const auto& c = m.config();
  const Params p(m);
  const Mat h = processor(p, ctx, c.levels, c.mp_layers_per_cycle, mlp(p, "encoder", x));
  Mat out = x;
  for (std::size_t f = 0; f < c.n_features; ++f) {
    const BranchOut b = branch(p, f, ctx.graph, h, c.rf, c.l_down, c.l_up);
    for (std::size_t i = 0; i < x.size(); ++i) out[i][f] += b.channel[i];
    if (masks) masks->push_back(b.keep);
  }
  return out;
}

inline Mat baseline_step(fignn::model::FignnModel& m, const fignn::model::GraphContext& ctx, const Mat& x) {
  const auto& c = m.config();
  const Params p(m);
  const Mat h = processor(p, ctx, c.levels, c.mp_layers_per_cycle, mlp(p, "encoder", x));
  Mat out = mlp(p, "decoder", h);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t f = 0; f < x[0].size(); ++f) out[i][f] += x[i][f];
  return out;
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

}  // namespace oracle
