#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fignn/autodiff.hpp"
#include "fignn/graph.hpp"

namespace fignn::model {

/// Node-score form for the Top-K projection: sigmoid(w.h), or the
/// unit-norm projection sigmoid(h.w/|w|).
enum class ScoreMode { Dot, Normalized };

struct ModelConfig {
  std::size_t n_features = 4;
  std::size_t hidden = 128;
  std::size_t mp_layers_per_cycle = 2;
  std::size_t mlp_depth = 2;
  std::size_t levels = 2;
  std::size_t rf = 16;
  std::size_t l_down = 2;
  std::size_t l_up = 2;
  ScoreMode score_mode = ScoreMode::Dot;
  double coarsen_factor = 2.0;
  std::uint64_t init_seed = 0;
  bool zero_final_decoder = false;
  /// Zero the last layer of every branch node-update MLP.
  bool zero_final_branch = false;

  void validate() const;
};

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

using ParamVisitor = std::function<void(const std::string&, ad::Tensor&)>;

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::uint64_t seed, const std::string& name);
  ad::Tensor operator()(const ad::Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn);
  void zero();

  ad::Tensor weight;  // [in, out]
  ad::Tensor bias;    // [1, out]
};

/// Dense layers with rational_elu between them; the last layer is linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<std::size_t>& widths, std::uint64_t seed, const std::string& name);
  ad::Tensor operator()(const ad::Tensor& x) const;
  void visit(const std::string& prefix, const ParamVisitor& fn);
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
};

/// One message-passing layer: messages from an MLP on [h_src, h_dst, e_ij],
/// mean aggregation at the destination, node update from an MLP on [h, agg],
/// residual add. The first layer of each MLP is stored split by input block
/// so the node-level projections are computed once per node.
class MessagePassingLayer {
 public:
  MessagePassingLayer() = default;
  MessagePassingLayer(std::size_t hidden, std::size_t mlp_depth, std::uint64_t seed, const std::string& name);
  ad::Tensor operator()(const ad::Tensor& h, const graph::Graph& g) const;
  void visit(const std::string& prefix, const ParamVisitor& fn);
  /// Zeroes the final node-update layer so the layer starts as the identity.
  void zero_final();

 private:
  ad::Tensor edge_w_src_, edge_w_dst_, edge_w_attr_, edge_b_;
  Mlp edge_rest_;
  ad::Tensor node_w_self_, node_w_agg_, node_b_;
  Mlp node_rest_;
};

struct ProcessorCycle {
  std::vector<MessagePassingLayer> fine;
  std::vector<MessagePassingLayer> coarse;
};

struct BaselineModel {
  Mlp encoder;
  std::vector<ProcessorCycle> processor;
  Mlp decoder;
  bool frozen = false;

  void visit(const ParamVisitor& fn);
};

struct FsimBranch {
  ad::Tensor w;  // [hidden, 1]
  std::vector<MessagePassingLayer> down;
  std::vector<MessagePassingLayer> up;

  void visit(const std::string& prefix, const ParamVisitor& fn);
};

/// Fine graph plus its coarsening hierarchy.
struct GraphContext {
  graph::Graph graph;
  graph::Hierarchy hierarchy;

  static GraphContext build(graph::Graph g, std::size_t levels, double factor = 2.0);
};

class FignnModel {
 public:
  FignnModel() = default;
  explicit FignnModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  void set_rf(std::size_t rf);
  void set_score_mode(ScoreMode m) { cfg_.score_mode = m; }

  BaselineModel& baseline() { return baseline_; }
  const BaselineModel& baseline() const { return baseline_; }
  std::vector<FsimBranch>& branches() { return branches_; }
  const std::vector<FsimBranch>& branches() const { return branches_; }

  /// Re-draws every branch parameter from `seed`; the baseline is untouched.
  void reinit_branches(std::uint64_t seed);
  /// Baseline tensors stop (or resume) requiring gradients.
  void freeze_baseline(bool frozen);

  /// Every parameter in manifest order: baseline first, then branch 0..F-1.
  std::vector<NamedTensor> parameters();
  std::vector<NamedTensor> baseline_parameters();
  std::vector<NamedTensor> branch_parameters(std::size_t f);

  /// Deep copy; the result shares no storage with *this.
  FignnModel clone() const;

 private:
  ModelConfig cfg_;
  BaselineModel baseline_;
  std::vector<FsimBranch> branches_;
};

/// Indices J_f kept by Top-K plus the binary node indicator.
struct Mask {
  std::size_t feature = 0;
  ad::Index keep;                 // ascending
  std::vector<std::uint8_t> binary;  // length N

  std::size_t size() const noexcept { return keep.size(); }
};

std::size_t mask_size(std::size_t n, std::size_t rf);

// ---- operations ------------------------------------------------------------

ad::Tensor encode(const ad::Tensor& x, const BaselineModel& m);
ad::Tensor mmp_process(const ad::Tensor& h, const GraphContext& ctx, const BaselineModel& m);
ad::Tensor decode(const ad::Tensor& h, const BaselineModel& m);

/// s_i = sigmoid(w . h_i) as an [N, 1] tensor.
ad::Tensor score_nodes(const ad::Tensor& h, const ad::Tensor& w, ScoreMode mode = ScoreMode::Dot);

/// K = max(1, floor(N/rf)) largest scores; ties go to the lower index.
Mask topk_select(std::span<const double> scores, std::size_t rf, std::size_t feature = 0);

/// Intermediates of one branch forward, exposed for diagnostics and tests.
struct BranchTrace {
  ad::Tensor scores;
  Mask mask;
  ad::Tensor h_pool;
  ad::Tensor h_coarse;
  ad::Tensor h_tilde;
  ad::Tensor h_up;
  ad::Tensor channel;  // [N, 1]
  bool pooled_edgeless = false;
};

BranchTrace fsim_branch_forward(const ad::Tensor& h, const graph::Graph& g, const FsimBranch& branch,
                                const BaselineModel& base, std::size_t feature, std::size_t rf,
                                ScoreMode mode = ScoreMode::Dot);

struct ForwardResult {
  ad::Tensor x_next;
  std::vector<Mask> masks;
  std::vector<bool> pooled_edgeless;
};

/// Baseline embedding h = mmp_process(encode(x)).
ad::Tensor embed(const ad::Tensor& x, const GraphContext& ctx, const FignnModel& model);

ad::Tensor baseline_forward(const ad::Tensor& x, const GraphContext& ctx, const FignnModel& model);
ForwardResult fignn_forward(const ad::Tensor& x, const GraphContext& ctx, const FignnModel& model);
/// FIGNN step from a precomputed embedding (the baseline is frozen, so h can
/// be cached across phase-2 steps).
ForwardResult fignn_forward_from_embedding(const ad::Tensor& x, const ad::Tensor& h, const GraphContext& ctx,
                                           const FignnModel& model);

struct ParameterCount {
  std::size_t encoder = 0;
  std::size_t processor = 0;
  std::size_t decoder = 0;
  std::vector<std::size_t> branches;

  std::size_t baseline() const { return encoder + processor + decoder; }
  std::size_t total() const;
};

/// Count by enumerating stored tensors.
ParameterCount count_parameters(FignnModel& model);
/// Closed-form count from the configuration alone.
ParameterCount analytic_parameter_count(const ModelConfig& cfg);

}  // namespace fignn::model
