#include "fignn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fignn/error.hpp"
#include "fignn/rng.hpp"

namespace fignn::model {

namespace {

ad::Tensor uniform_tensor(std::size_t rows, std::size_t cols, std::size_t fan_in, std::uint64_t seed,
                          const std::string& name) {
  CounterRng rng(seed, stream_id(name.c_str()));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return ad::Tensor::from({rows, cols}, std::move(v), true);
}

void zero_tensor(ad::Tensor& t) {
  auto d = t.mutable_data();
  std::fill(d.begin(), d.end(), 0.0);
}

std::vector<std::size_t> widths(std::size_t in, std::size_t hidden, std::size_t out, std::size_t depth) {
  std::vector<std::size_t> w{in};
  for (std::size_t l = 1; l < depth; ++l) w.push_back(hidden);
  w.push_back(out);
  return w;
}

}  // namespace

void ModelConfig::validate() const {
  if (n_features == 0) throw ConfigError("model: n_features must be >= 1");
  if (rf < 1) throw ConfigError("model: rf must be >= 1");
  if (hidden < n_features) throw ConfigError("model: hidden must be >= n_features");
  if (levels < 1) throw ConfigError("model: levels must be >= 1");
  if (mlp_depth < 1) throw ConfigError("model: mlp_depth must be >= 1");
  if (!(coarsen_factor > 1.0)) throw ConfigError("model: coarsen_factor must exceed 1");
}

// ---- Linear / Mlp ------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out, std::uint64_t seed, const std::string& name)
    : weight(uniform_tensor(in, out, in, seed, name + ".weight")),
      bias(uniform_tensor(1, out, in, seed, name + ".bias")) {}

ad::Tensor Linear::operator()(const ad::Tensor& x) const { return ad::add_row_bias(ad::matmul(x, weight), bias); }

void Linear::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".weight", weight);
  fn(prefix + ".bias", bias);
}

void Linear::zero() {
  zero_tensor(weight);
  zero_tensor(bias);
}

Mlp::Mlp(const std::vector<std::size_t>& w, std::uint64_t seed, const std::string& name) {
  for (std::size_t l = 0; l + 1 < w.size(); ++l)
    layers_.emplace_back(w[l], w[l + 1], seed, name + "." + std::to_string(l));
}

ad::Tensor Mlp::operator()(const ad::Tensor& x) const {
  ad::Tensor y = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (l > 0) y = ad::rational_elu(y);
    y = layers_[l](y);
  }
  return y;
}

void Mlp::visit(const std::string& prefix, const ParamVisitor& fn) {
  for (std::size_t l = 0; l < layers_.size(); ++l) layers_[l].visit(prefix + "." + std::to_string(l), fn);
}

// ---- message passing -----------------------------------------------------------

MessagePassingLayer::MessagePassingLayer(std::size_t hidden, std::size_t depth, std::uint64_t seed,
                                         const std::string& name) {
  const std::size_t edge_in = 2 * hidden + 3;
  const std::size_t node_in = 2 * hidden;
  edge_w_src_ = uniform_tensor(hidden, hidden, edge_in, seed, name + ".edge.0.w_src");
  edge_w_dst_ = uniform_tensor(hidden, hidden, edge_in, seed, name + ".edge.0.w_dst");
  edge_w_attr_ = uniform_tensor(3, hidden, edge_in, seed, name + ".edge.0.w_attr");
  edge_b_ = uniform_tensor(1, hidden, edge_in, seed, name + ".edge.0.bias");
  node_w_self_ = uniform_tensor(hidden, hidden, node_in, seed, name + ".node.0.w_self");
  node_w_agg_ = uniform_tensor(hidden, hidden, node_in, seed, name + ".node.0.w_agg");
  node_b_ = uniform_tensor(1, hidden, node_in, seed, name + ".node.0.bias");
  if (depth > 1) {
    std::vector<std::size_t> rest(depth, hidden);
    edge_rest_ = Mlp(rest, seed, name + ".edge.rest");
    node_rest_ = Mlp(rest, seed, name + ".node.rest");
  }
}

ad::Tensor MessagePassingLayer::operator()(const ad::Tensor& h, const graph::Graph& g) const {
  const std::size_t n = h.rows();
  if (n != g.num_nodes()) {
    throw ContractError("message passing: " + std::to_string(n) + " embeddings for a graph of " +
                        std::to_string(g.num_nodes()) + " nodes");
  }
  const ad::Tensor from_src = ad::gather_rows(ad::matmul(h, edge_w_src_), g.src());
  const ad::Tensor from_dst = ad::gather_rows(ad::matmul(h, edge_w_dst_), g.dst());
  const ad::Tensor from_attr = ad::matmul(g.edge_feature_tensor(), edge_w_attr_);
  ad::Tensor msg = ad::add_row_bias(ad::add(ad::add(from_src, from_dst), from_attr), edge_b_);
  if (!edge_rest_.layers().empty()) msg = edge_rest_(ad::rational_elu(msg));
  const ad::Tensor agg = ad::segment_mean(msg, g.dst(), n);

  ad::Tensor upd = ad::add_row_bias(ad::add(ad::matmul(h, node_w_self_), ad::matmul(agg, node_w_agg_)), node_b_);
  if (!node_rest_.layers().empty()) upd = node_rest_(ad::rational_elu(upd));
  return ad::add(h, upd);
}

void MessagePassingLayer::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".edge.0.w_src", edge_w_src_);
  fn(prefix + ".edge.0.w_dst", edge_w_dst_);
  fn(prefix + ".edge.0.w_attr", edge_w_attr_);
  fn(prefix + ".edge.0.bias", edge_b_);
  edge_rest_.visit(prefix + ".edge.rest", fn);
  fn(prefix + ".node.0.w_self", node_w_self_);
  fn(prefix + ".node.0.w_agg", node_w_agg_);
  fn(prefix + ".node.0.bias", node_b_);
  node_rest_.visit(prefix + ".node.rest", fn);
}

void MessagePassingLayer::zero_final() {
  if (node_rest_.layers().empty()) {
    zero_tensor(node_w_self_);
    zero_tensor(node_w_agg_);
    zero_tensor(node_b_);
  } else {
    node_rest_.layers().back().zero();
  }
}

// ---- containers ----------------------------------------------------------------

void BaselineModel::visit(const ParamVisitor& fn) {
  encoder.visit("encoder", fn);
  for (std::size_t c = 0; c < processor.size(); ++c) {
    const std::string p = "processor.cycle" + std::to_string(c);
    for (std::size_t l = 0; l < processor[c].fine.size(); ++l) processor[c].fine[l].visit(p + ".fine" + std::to_string(l), fn);
    for (std::size_t l = 0; l < processor[c].coarse.size(); ++l)
      processor[c].coarse[l].visit(p + ".coarse" + std::to_string(l), fn);
  }
  decoder.visit("decoder", fn);
}

void FsimBranch::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".w", w);
  for (std::size_t l = 0; l < down.size(); ++l) down[l].visit(prefix + ".down" + std::to_string(l), fn);
  for (std::size_t l = 0; l < up.size(); ++l) up[l].visit(prefix + ".up" + std::to_string(l), fn);
}

GraphContext GraphContext::build(graph::Graph g, std::size_t levels, double factor) {
  GraphContext ctx;
  ctx.hierarchy = graph::build_hierarchy(g, levels, factor);
  ctx.graph = std::move(g);
  return ctx;
}

namespace {

FsimBranch make_branch(const ModelConfig& cfg, std::size_t f, std::uint64_t seed) {
  FsimBranch b;
  const std::string p = "branch" + std::to_string(f);
  b.w = uniform_tensor(cfg.hidden, 1, cfg.hidden, seed, p + ".w");
  for (std::size_t l = 0; l < cfg.l_down; ++l)
    b.down.emplace_back(cfg.hidden, cfg.mlp_depth, seed, p + ".down" + std::to_string(l));
  for (std::size_t l = 0; l < cfg.l_up; ++l)
    b.up.emplace_back(cfg.hidden, cfg.mlp_depth, seed, p + ".up" + std::to_string(l));
  if (cfg.zero_final_branch) {
    for (auto& layer : b.down) layer.zero_final();
    for (auto& layer : b.up) layer.zero_final();
  }
  return b;
}

}  // namespace

FignnModel::FignnModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t h = cfg.hidden, d = cfg.mlp_depth;
  const std::uint64_t seed = cfg.init_seed;
  baseline_.encoder = Mlp(widths(cfg.n_features, h, h, d), seed, "encoder");
  for (std::size_t c = 0; c < cfg.levels; ++c) {
    ProcessorCycle cyc;
    const std::string p = "processor.cycle" + std::to_string(c);
    for (std::size_t l = 0; l < cfg.mp_layers_per_cycle; ++l) {
      cyc.fine.emplace_back(h, d, seed, p + ".fine" + std::to_string(l));
      cyc.coarse.emplace_back(h, d, seed, p + ".coarse" + std::to_string(l));
    }
    baseline_.processor.push_back(std::move(cyc));
  }
  baseline_.decoder = Mlp(widths(h, h, cfg.n_features, d), seed, "decoder");
  if (cfg.zero_final_decoder) baseline_.decoder.layers().back().zero();
  reinit_branches(seed);
}

void FignnModel::set_rf(std::size_t rf) {
  if (rf < 1) throw ConfigError("model: rf must be >= 1");
  cfg_.rf = rf;
}

void FignnModel::reinit_branches(std::uint64_t seed) {
  branches_.clear();
  for (std::size_t f = 0; f < cfg_.n_features; ++f) branches_.push_back(make_branch(cfg_, f, seed));
}

void FignnModel::freeze_baseline(bool frozen) {
  baseline_.frozen = frozen;
  baseline_.visit([frozen](const std::string&, ad::Tensor& t) { t.set_requires_grad(!frozen); });
}

std::vector<NamedTensor> FignnModel::baseline_parameters() {
  std::vector<NamedTensor> out;
  baseline_.visit([&out](const std::string& n, ad::Tensor& t) { out.push_back({n, t}); });
  return out;
}

std::vector<NamedTensor> FignnModel::branch_parameters(std::size_t f) {
  std::vector<NamedTensor> out;
  branches_.at(f).visit("branch" + std::to_string(f), [&out](const std::string& n, ad::Tensor& t) {
    out.push_back({n, t});
  });
  return out;
}

std::vector<NamedTensor> FignnModel::parameters() {
  auto out = baseline_parameters();
  for (std::size_t f = 0; f < branches_.size(); ++f) {
    auto b = branch_parameters(f);
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

FignnModel FignnModel::clone() const {
  FignnModel copy = *this;
  auto deep = [](const std::string&, ad::Tensor& t) { t = t.clone(); };
  copy.baseline_.visit(deep);
  for (std::size_t f = 0; f < copy.branches_.size(); ++f) copy.branches_[f].visit("", deep);
  return copy;
}

// ---- operations ----------------------------------------------------------------

std::size_t mask_size(std::size_t n, std::size_t rf) {
  if (rf == 0) throw ConfigError("rf must be >= 1");
  return std::max<std::size_t>(1, n / rf);
}

ad::Tensor encode(const ad::Tensor& x, const BaselineModel& m) { return m.encoder(x); }

ad::Tensor decode(const ad::Tensor& h, const BaselineModel& m) { return m.decoder(h); }

ad::Tensor mmp_process(const ad::Tensor& h_in, const GraphContext& ctx, const BaselineModel& m) {
  const auto& g = ctx.graph;
  const auto& hier = ctx.hierarchy;
  if (hier.fine_nodes != g.num_nodes() || hier.size() < m.processor.size()) {
    throw ContractError("mmp_process: hierarchy with " + std::to_string(hier.size()) + " levels over " +
                        std::to_string(hier.fine_nodes) + " nodes does not match a " +
                        std::to_string(m.processor.size()) + "-cycle processor on " +
                        std::to_string(g.num_nodes()) + " nodes");
  }
  if (h_in.rows() != g.num_nodes()) {
    throw ContractError("mmp_process: embedding rows do not match graph nodes");
  }
  ad::Tensor h = h_in;
  for (std::size_t c = 0; c < m.processor.size(); ++c) {
    const auto& cycle = m.processor[c];
    for (const auto& layer : cycle.fine) h = layer(h, g);
    const auto& level = hier.levels[c];
    const auto& parent = hier.fine_parent[c];
    ad::Tensor hc = ad::segment_mean(h, parent, level.num_clusters());
    for (const auto& layer : cycle.coarse) hc = layer(hc, level.graph);
    h = ad::add(h, ad::gather_rows(hc, parent));
  }
  return h;
}

ad::Tensor score_nodes(const ad::Tensor& h, const ad::Tensor& w, ScoreMode mode) {
  const ad::Tensor proj = mode == ScoreMode::Normalized ? ad::l2_normalize(w) : w;
  return ad::sigmoid(ad::matmul(h, proj));
}

Mask topk_select(std::span<const double> scores, std::size_t rf, std::size_t feature) {
  const std::size_t n = scores.size();
  if (n == 0) throw ContractError("topk_select: no scores");
  const std::size_t k = mask_size(n, rf);
  ad::Index order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&scores](std::size_t a, std::size_t b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  Mask m;
  m.feature = feature;
  m.keep.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(m.keep.begin(), m.keep.end());
  m.binary.assign(n, 0);
  for (std::size_t i : m.keep) m.binary[i] = 1;
  return m;
}

BranchTrace fsim_branch_forward(const ad::Tensor& h, const graph::Graph& g, const FsimBranch& branch,
                                const BaselineModel& base, std::size_t feature, std::size_t rf, ScoreMode mode) {
  BranchTrace tr;
  const std::size_t n = h.rows();
  tr.scores = score_nodes(h, branch.w, mode);
  tr.mask = topk_select(tr.scores.data(), rf, feature);
  const auto& keep = tr.mask.keep;
  tr.h_pool = ad::scale_rows(ad::gather_rows(h, keep), ad::gather_rows(tr.scores, keep));
  const graph::Graph sub = graph::pooled_subgraph(g, keep);
  tr.pooled_edgeless = sub.num_edges() == 0;
  tr.h_coarse = tr.h_pool;
  for (const auto& layer : branch.down) tr.h_coarse = layer(tr.h_coarse, sub);
  tr.h_tilde = ad::add(ad::scatter_rows_zero(tr.h_coarse, keep, n), h);
  tr.h_up = tr.h_tilde;
  for (const auto& layer : branch.up) tr.h_up = layer(tr.h_up, g);
  tr.channel = ad::column(decode(tr.h_up, base), feature);
  return tr;
}

ad::Tensor embed(const ad::Tensor& x, const GraphContext& ctx, const FignnModel& model) {
  if (x.cols() != model.config().n_features) {
    throw ContractError("forward: input has " + std::to_string(x.cols()) + " features, model expects " +
                        std::to_string(model.config().n_features));
  }
  return mmp_process(encode(x, model.baseline()), ctx, model.baseline());
}

ad::Tensor baseline_forward(const ad::Tensor& x, const GraphContext& ctx, const FignnModel& model) {
  return ad::add(x, decode(embed(x, ctx, model), model.baseline()));
}

ForwardResult fignn_forward_from_embedding(const ad::Tensor& x, const ad::Tensor& h, const GraphContext& ctx,
                                           const FignnModel& model) {
  const auto& cfg = model.config();
  if (model.branches().size() != cfg.n_features || x.cols() != cfg.n_features) {
    throw ContractError("fignn_forward: feature count mismatch (input " + std::to_string(x.cols()) + ", branches " +
                        std::to_string(model.branches().size()) + ", config " + std::to_string(cfg.n_features) + ")");
  }
  ForwardResult out;
  std::vector<ad::Tensor> channels;
  for (std::size_t f = 0; f < cfg.n_features; ++f) {
    BranchTrace tr = fsim_branch_forward(h, ctx.graph, model.branches()[f], model.baseline(), f, cfg.rf, cfg.score_mode);
    channels.push_back(tr.channel);
    out.masks.push_back(std::move(tr.mask));
    out.pooled_edgeless.push_back(tr.pooled_edgeless);
  }
  out.x_next = ad::add(x, ad::concat_cols(channels));
  return out;
}

ForwardResult fignn_forward(const ad::Tensor& x, const GraphContext& ctx, const FignnModel& model) {
  return fignn_forward_from_embedding(x, embed(x, ctx, model), ctx, model);
}

// ---- parameter counts ------------------------------------------------------------

std::size_t ParameterCount::total() const {
  return baseline() + std::accumulate(branches.begin(), branches.end(), std::size_t{0});
}

ParameterCount count_parameters(FignnModel& model) {
  ParameterCount pc;
  for (const auto& p : model.baseline_parameters()) {
    const std::size_t n = p.tensor.size();
    if (p.name.starts_with("encoder")) pc.encoder += n;
    else if (p.name.starts_with("processor")) pc.processor += n;
    else pc.decoder += n;
  }
  for (std::size_t f = 0; f < model.branches().size(); ++f) {
    std::size_t n = 0;
    for (const auto& p : model.branch_parameters(f)) n += p.tensor.size();
    pc.branches.push_back(n);
  }
  return pc;
}

ParameterCount analytic_parameter_count(const ModelConfig& cfg) {
  const std::size_t h = cfg.hidden, d = cfg.mlp_depth, f = cfg.n_features;
  auto linear = [](std::size_t a, std::size_t b) { return a * b + b; };
  const std::size_t hidden_tail = (d - 1) * linear(h, h);
  const std::size_t mp_layer = linear(2 * h + 3, h) + hidden_tail + linear(2 * h, h) + hidden_tail;
  ParameterCount pc;
  pc.encoder = d == 1 ? linear(f, h) : linear(f, h) + hidden_tail;
  pc.decoder = d == 1 ? linear(h, f) : hidden_tail + linear(h, f);
  pc.processor = cfg.levels * 2 * cfg.mp_layers_per_cycle * mp_layer;
  pc.branches.assign(f, h + (cfg.l_down + cfg.l_up) * mp_layer);
  return pc;
}

}  // namespace fignn::model
