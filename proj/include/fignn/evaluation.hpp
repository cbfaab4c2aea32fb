#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fignn/model.hpp"
#include "fignn/synthdata.hpp"
#include "fignn/training.hpp"

namespace fignn::eval {

struct Fraction {
  double value = 0.0;
  bool degenerate = false;  // total squared error was zero
};

/// Share of the squared error that falls on the masked nodes.
Fraction budget_fraction(std::span<const double> err_sq, const model::Mask& mask);

struct FeatureBudget {
  double budget_value = 0.0;     // masked MSE, the loss ingredient
  double budget_fraction = 0.0;  // masked SSE / SSE
  double sse = 0.0;
  double masked_sse = 0.0;
  bool degenerate = false;
};

/// Budgets of one prediction (a test pair or a rollout step).
struct BudgetRow {
  std::size_t index = 0;
  std::vector<FeatureBudget> features;
  double total_fraction = 0.0;
  bool degenerate = false;
};

struct BudgetReport {
  double lambda = 0.0;
  std::size_t rf = 0;
  std::uint64_t seed = 0;
  std::vector<BudgetRow> rows;
  /// SSE-pooled fractions and mean budget values over all rows.
  BudgetRow aggregate;
};

BudgetRow budget_row(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<model::Mask>& masks,
                     std::size_t index);
BudgetRow aggregate_rows(const std::vector<BudgetRow>& rows);

struct Echo {
  double lambda = 0.0;
  std::size_t rf = 0;
  std::uint64_t seed = 0;
};

/// One forward per test pair; rows indexed by pair.
BudgetReport single_step_report(const model::FignnModel& m, const data::Trajectory& traj,
                                const model::GraphContext& ctx, const std::vector<std::size_t>& pairs, Echo echo);

struct RolloutResult {
  std::vector<ad::Tensor> states;                // states[0] is the initial condition
  std::vector<std::vector<model::Mask>> masks;   // masks[t-1] came with states[t]
  std::vector<std::vector<double>> mse;          // per step t >= 1, per feature; empty without truth
  bool truncated = false;
  std::string diagnostic;

  std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

/// Autoregressive FIGNN rollout. When `truth` is given, `truth(t)` is compared
/// to step t for t in 1..steps.
RolloutResult rollout(const model::FignnModel& m, const ad::Tensor& x0, const model::GraphContext& ctx,
                      std::size_t steps);
RolloutResult rollout(const model::FignnModel& m, const data::Trajectory& traj, std::size_t start,
                      const model::GraphContext& ctx, std::size_t steps);

enum class MaskMode { PerStep, FrozenFirst };
const char* mask_mode_name(MaskMode m);
MaskMode parse_mask_mode(const std::string& s);

/// Budgets of every rollout step against snapshots start+t of `traj`.
BudgetReport rollout_report(const RolloutResult& r, const data::Trajectory& traj, std::size_t start, MaskMode mode,
                            Echo echo);

/// Fraction of edges whose endpoints are both in or both out of the mask.
double mask_coherence(const model::Mask& mask, const graph::Graph& g);
double jaccard(const model::Mask& a, const model::Mask& b);

struct MaskStats {
  std::vector<double> coherence;            // per feature, mean over snapshots
  std::vector<double> stability;            // per feature, Jaccard of consecutive snapshots
  std::vector<std::vector<double>> overlap; // F x F mean Jaccard, unit diagonal
  double mean_coherence = 0.0;
};

/// `masks[s][f]` is feature f's mask on snapshot s (consecutive snapshots).
MaskStats mask_stats(const std::vector<std::vector<model::Mask>>& masks, const graph::Graph& g);

/// Masks of each test pair's single-step forward.
std::vector<std::vector<model::Mask>> snapshot_masks(const model::FignnModel& m, const data::Trajectory& traj,
                                                     const model::GraphContext& ctx,
                                                     const std::vector<std::size_t>& pairs);

/// One row per report row: index, budget_value_<f>, budget_fraction_<f>,
/// optional mse_<f>, total_fraction.
void write_budget_csv(const std::filesystem::path& p, const BudgetReport& rep, const std::vector<std::string>& names,
                      const std::string& index_col, const std::vector<std::vector<double>>* mse = nullptr);
/// node, mask_<f> bits.
void write_mask_csv(const std::filesystem::path& p, const std::vector<model::Mask>& masks,
                    const std::vector<std::string>& names);

// ---- sweep -----------------------------------------------------------------

struct SweepConfig {
  std::string dataset = "dataset";
  std::vector<double> lambdas{0.0, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<std::size_t> rfs{4, 8, 16};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  train::TrainConfig train;
  double eps = 1e-8;
  std::size_t rollout_steps = 20;
  std::size_t max_test_pairs = 40;
  MaskMode mask_mode = MaskMode::PerStep;
  std::filesystem::path out_root = "reports";
};

struct CellSummary {
  double lambda = 0.0;
  std::size_t rf = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::filesystem::path dir;
  double test_mse = 0.0;
  double total_fraction = 0.0;
  double mean_coherence = 0.0;
};

/// Directory name of a lambda value ("0", "0.0001", "0.1", ...).
std::string lambda_dirname(double lambda);
std::filesystem::path cell_dir(const SweepConfig& cfg, double lambda, std::size_t rf, std::uint64_t seed);

/// Evaluates a trained FIGNN and writes one report cell atomically.
CellSummary evaluate_cell(const train::TrainResult& trained, const data::Trajectory& traj,
                          const data::DatasetSplit& split, const model::GraphContext& ctx, const SweepConfig& cfg,
                          Echo echo);

/// One FIGNN per (lambda, rf, seed) from the shared frozen baseline. Failed
/// cells are recorded and the sweep continues.
std::vector<CellSummary> run_sweep(const model::FignnModel& baseline, const data::Trajectory& traj,
                                   const data::DatasetSplit& split, const model::GraphContext& ctx,
                                   const SweepConfig& cfg);

// ---- field export ----------------------------------------------------------

/// fields_step{t}.csv for t = 1..steps (node, x, y, values, mask bits) plus
/// summary.json with the per-step MSE curves.
void export_fields(const RolloutResult& r, const graph::Graph& g, const std::vector<std::string>& feature_names,
                   const std::filesystem::path& out_dir);

struct FieldTable {
  std::vector<std::size_t> node;
  std::vector<double> x, y;
  std::vector<std::vector<double>> values;       // per row, per feature
  std::vector<std::vector<std::uint8_t>> masks;  // per row, per feature
};
FieldTable read_fields_csv(const std::filesystem::path& file);

}  // namespace fignn::eval
