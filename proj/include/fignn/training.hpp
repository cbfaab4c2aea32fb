#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fignn/autodiff.hpp"
#include "fignn/model.hpp"
#include "fignn/synthdata.hpp"

namespace fignn::train {

struct LossConfig {
  double lambda = 0.0;
  double eps = 1e-8;
  void validate() const;
};

/// Masked-entry mean of squared error over the nodes of `mask`.
ad::Tensor budget(const ad::Tensor& pred_f, const ad::Tensor& target_f, const model::Mask& mask);

struct LossTerms {
  ad::Tensor total;
  ad::Tensor mse;
  std::vector<ad::Tensor> budgets;
};

/// MSE over all N*F entries + lambda * sum_f 1/(Budget_f + eps).
LossTerms fignn_loss(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<model::Mask>& masks,
                     const LossConfig& cfg);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct Moments {
  std::vector<double> m;
  std::vector<double> v;
};

/// Adam with bias correction; moments keyed by parameter name.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(std::vector<model::NamedTensor>& params);
  std::size_t steps() const noexcept { return t_; }
  const std::map<std::string, Moments>& moments() const noexcept { return moments_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

enum class Phase { Baseline, Fignn };
const char* phase_name(Phase p);

struct TrainConfig {
  std::size_t epochs = 500;
  double lr = 1e-3;
  /// Training pairs used per epoch, strided evenly over the train portion.
  std::size_t max_train_pairs = 16;
  std::size_t max_val_pairs = 4;
  double val_fraction = 0.1;
  std::size_t eval_every = 10;
  double divergence_threshold = 1e6;
  bool log_wall_time = false;
};

struct LogRow {
  std::size_t step = 0;
  Phase phase = Phase::Baseline;
  double lambda = 0.0;
  std::size_t rf = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;  // NaN when not evaluated at this step
  std::vector<double> budgets;
  double wall_ms = 0.0;
};

struct TrainState {
  Phase phase = Phase::Baseline;
  std::size_t step = 0;
  Adam optimizer;
  std::uint64_t seed = 0;
  double best_val = 0.0;
};

struct TrainResult {
  model::FignnModel model;  // best-validation parameters
  std::vector<LogRow> log;
  TrainState state;
  double initial_train_mse = 0.0;
  double final_train_mse = 0.0;  // after the last step, before best-checkpoint restore
  bool diverged = false;
  std::string message;
};

/// Pair indices used for training and validation.
struct PairSelection {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};
PairSelection select_pairs(const data::DatasetSplit& split, const TrainConfig& cfg);

/// Evenly strided subset of [begin, end) with at most `max` entries.
std::vector<std::size_t> strided(std::size_t begin, std::size_t end, std::size_t max);

TrainResult train_baseline(const data::Trajectory& traj, const data::DatasetSplit& split,
                           const model::GraphContext& ctx, const model::ModelConfig& mcfg, const TrainConfig& cfg);

/// Phase 2: copies `baseline`, draws fresh branches from `seed`, freezes the
/// baseline and optimises only the branch parameters against the budget loss.
TrainResult train_fignn(const model::FignnModel& baseline, const data::Trajectory& traj,
                        const data::DatasetSplit& split, const model::GraphContext& ctx, const LossConfig& loss,
                        std::size_t rf, const TrainConfig& cfg, std::uint64_t seed);

/// Single-step MSE of the baseline over the given pairs (no tape).
double baseline_mse(const model::FignnModel& m, const data::Trajectory& traj, const model::GraphContext& ctx,
                    const std::vector<std::size_t>& pairs);
/// Single-step MSE of the full FIGNN forward over the given pairs (no tape).
double fignn_mse(const model::FignnModel& m, const data::Trajectory& traj, const model::GraphContext& ctx,
                 const std::vector<std::size_t>& pairs);

void write_log_csv(const std::string& path, const std::vector<LogRow>& rows, std::size_t n_features);

}  // namespace fignn::train
