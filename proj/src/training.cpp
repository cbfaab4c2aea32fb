#include "fignn/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "fignn/error.hpp"
#include "fignn/format.hpp"

namespace fignn::train {

using model::FignnModel;
using model::GraphContext;

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss: lambda must be >= 0");
  if (!(eps > 0.0)) throw ConfigError("loss: eps must be > 0");
}

ad::Tensor budget(const ad::Tensor& pred_f, const ad::Tensor& target_f, const model::Mask& mask) {
  if (pred_f.shape() != target_f.shape()) {
    throw DimensionError("budget: prediction " + ad::shape_str(pred_f.shape()) + " vs target " +
                         ad::shape_str(target_f.shape()));
  }
  return ad::mean(ad::square(ad::gather_rows(ad::sub(pred_f, target_f), mask.keep)));
}

LossTerms fignn_loss(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<model::Mask>& masks,
                     const LossConfig& cfg) {
  cfg.validate();
  if (pred.shape() != target.shape()) {
    throw DimensionError("fignn_loss: prediction " + ad::shape_str(pred.shape()) + " vs target " +
                         ad::shape_str(target.shape()));
  }
  if (masks.size() != pred.cols()) throw ContractError("fignn_loss: one mask per feature required");
  LossTerms terms;
  terms.mse = ad::mse(pred, target);
  terms.total = terms.mse;
  for (std::size_t f = 0; f < masks.size(); ++f) {
    terms.budgets.push_back(budget(ad::column(pred, f), ad::column(target, f), masks[f]));
    if (cfg.lambda > 0.0) {
      const ad::Tensor penalty = ad::reciprocal(ad::add_scalar(terms.budgets.back(), cfg.eps));
      terms.total = ad::add(terms.total, ad::scale(penalty, cfg.lambda));
    }
  }
  if (!std::isfinite(terms.total.item())) throw TrainingError("fignn_loss: non-finite loss");
  return terms;
}

void Adam::step(std::vector<model::NamedTensor>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& p : params) {
    auto& mom = moments_[p.name];
    const std::size_t n = p.tensor.size();
    if (mom.m.empty()) {
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    }
    const std::vector<double> g = p.tensor.grad();
    auto w = p.tensor.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      mom.m[i] = cfg_.beta1 * mom.m[i] + (1.0 - cfg_.beta1) * g[i];
      mom.v[i] = cfg_.beta2 * mom.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mh = mom.m[i] / bc1;
      const double vh = mom.v[i] / bc2;
      w[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
    }
  }
}

const char* phase_name(Phase p) { return p == Phase::Baseline ? "baseline" : "fignn"; }

std::vector<std::size_t> strided(std::size_t begin, std::size_t end, std::size_t max) {
  std::vector<std::size_t> out;
  const std::size_t n = end > begin ? end - begin : 0;
  if (n == 0 || max == 0) return out;
  const std::size_t k = std::min(n, max);
  for (std::size_t i = 0; i < k; ++i) out.push_back(begin + i * n / k);
  return out;
}

PairSelection select_pairs(const data::DatasetSplit& split, const TrainConfig& cfg) {
  const std::size_t n = split.train_pairs();
  if (n < 2) throw ConfigError("training needs at least 2 train pairs");
  auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  const std::size_t fit_end = split.train_end - n_val;
  return {strided(split.train_begin, fit_end, cfg.max_train_pairs),
          strided(fit_end, split.train_end, cfg.max_val_pairs)};
}

double baseline_mse(const FignnModel& m, const data::Trajectory& traj, const GraphContext& ctx,
                    const std::vector<std::size_t>& pairs) {
  double acc = 0.0;
  for (std::size_t p : pairs) {
    const ad::Tensor pred = model::baseline_forward(traj.snapshot(p), ctx, m);
    acc += ad::mse(pred, traj.snapshot(p + 1)).item();
  }
  return pairs.empty() ? 0.0 : acc / static_cast<double>(pairs.size());
}

double fignn_mse(const FignnModel& m, const data::Trajectory& traj, const GraphContext& ctx,
                 const std::vector<std::size_t>& pairs) {
  double acc = 0.0;
  for (std::size_t p : pairs) {
    const auto res = model::fignn_forward(traj.snapshot(p), ctx, m);
    acc += ad::mse(res.x_next, traj.snapshot(p + 1)).item();
  }
  return pairs.empty() ? 0.0 : acc / static_cast<double>(pairs.size());
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void zero_grads(std::vector<model::NamedTensor>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

bool diverging(double loss, double threshold) { return !std::isfinite(loss) || loss > threshold; }

}  // namespace

TrainResult train_baseline(const data::Trajectory& traj, const data::DatasetSplit& split, const GraphContext& ctx,
                           const model::ModelConfig& mcfg, const TrainConfig& cfg) {
  traj.validate();
  if (traj.features != mcfg.n_features) {
    throw ConfigError("train_baseline: trajectory has " + std::to_string(traj.features) + " features, model expects " +
                      std::to_string(mcfg.n_features));
  }
  const PairSelection pairs = select_pairs(split, cfg);
  TrainResult res;
  res.model = FignnModel(mcfg);
  res.state.phase = Phase::Baseline;
  res.state.seed = mcfg.init_seed;
  res.state.optimizer = Adam(AdamConfig{cfg.lr});
  res.state.best_val = std::numeric_limits<double>::infinity();
  FignnModel best = res.model.clone();
  FignnModel last_good = res.model.clone();
  auto params = res.model.baseline_parameters();
  const auto t0 = Clock::now();
  const double inv = 1.0 / static_cast<double>(pairs.train.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    zero_grads(params);
    double loss_sum = 0.0;
    try {
      for (std::size_t p : pairs.train) {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        const ad::Tensor pred = model::baseline_forward(traj.snapshot(p), ctx, res.model);
        const ad::Tensor loss = ad::scale(ad::mse(pred, traj.snapshot(p + 1)), inv);
        loss_sum += loss.item();
        tape.backward(loss);
      }
    } catch (const NumericalDomainError& e) {
      loss_sum = std::numeric_limits<double>::quiet_NaN();
    }
    if (epoch == 0) res.initial_train_mse = loss_sum;
    if (diverging(loss_sum, cfg.divergence_threshold)) {
      res.diverged = true;
      res.message = "baseline training diverged at step " + std::to_string(epoch) + " (loss " + num17(loss_sum) + ")";
      res.model = last_good;
      return res;
    }
    last_good = res.model.clone();
    res.state.optimizer.step(params);
    res.state.step = epoch + 1;

    LogRow row;
    row.step = epoch;
    row.phase = Phase::Baseline;
    row.rf = mcfg.rf;
    row.train_mse = loss_sum;
    row.val_mse = std::numeric_limits<double>::quiet_NaN();
    const bool last = epoch + 1 == cfg.epochs;
    if (last || (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0)) {
      row.val_mse = baseline_mse(res.model, traj, ctx, pairs.val);
      if (row.val_mse < res.state.best_val) {
        res.state.best_val = row.val_mse;
        best = res.model.clone();
      }
    }
    row.wall_ms = cfg.log_wall_time ? elapsed_ms(t0) : 0.0;
    res.log.push_back(std::move(row));
  }
  res.final_train_mse = baseline_mse(res.model, traj, ctx, pairs.train);
  if (cfg.epochs == 0) res.initial_train_mse = res.final_train_mse;
  if (std::isfinite(res.state.best_val)) res.model = best;
  res.model.freeze_baseline(true);
  return res;
}

TrainResult train_fignn(const FignnModel& baseline, const data::Trajectory& traj, const data::DatasetSplit& split,
                        const GraphContext& ctx, const LossConfig& loss_cfg, std::size_t rf, const TrainConfig& cfg,
                        std::uint64_t seed) {
  traj.validate();
  loss_cfg.validate();
  const std::size_t nf = baseline.config().n_features;
  if (traj.features != nf) throw ConfigError("train_fignn: trajectory/model feature count mismatch");
  const PairSelection pairs = select_pairs(split, cfg);

  TrainResult res;
  res.model = baseline.clone();
  res.model.set_rf(rf);
  res.model.reinit_branches(seed);
  res.model.freeze_baseline(true);
  res.state.phase = Phase::Fignn;
  res.state.seed = seed;
  res.state.optimizer = Adam(AdamConfig{cfg.lr});
  res.state.best_val = std::numeric_limits<double>::infinity();

  // The baseline is frozen, so its embeddings are fixed per snapshot.
  auto cache = [&](const std::vector<std::size_t>& ps) {
    std::vector<ad::Tensor> hs;
    for (std::size_t p : ps) hs.push_back(model::embed(traj.snapshot(p), ctx, res.model));
    return hs;
  };
  const std::vector<ad::Tensor> h_train = cache(pairs.train);
  const std::vector<ad::Tensor> h_val = cache(pairs.val);

  std::vector<model::NamedTensor> params;
  for (std::size_t f = 0; f < nf; ++f) {
    auto b = res.model.branch_parameters(f);
    params.insert(params.end(), b.begin(), b.end());
  }
  FignnModel best = res.model.clone();
  FignnModel last_good = res.model.clone();
  const auto t0 = Clock::now();
  const double inv = 1.0 / static_cast<double>(pairs.train.size());

  auto val_loss = [&](double* mse_out) {
    double total = 0.0, mse = 0.0;
    for (std::size_t q = 0; q < pairs.val.size(); ++q) {
      const std::size_t p = pairs.val[q];
      const auto out = model::fignn_forward_from_embedding(traj.snapshot(p), h_val[q], ctx, res.model);
      const auto terms = fignn_loss(out.x_next, traj.snapshot(p + 1), out.masks, loss_cfg);
      total += terms.total.item();
      mse += terms.mse.item();
    }
    const double k = static_cast<double>(pairs.val.size());
    *mse_out = mse / k;
    return total / k;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    zero_grads(params);
    double total_sum = 0.0, mse_sum = 0.0;
    std::vector<double> budgets(nf, 0.0);
    try {
      for (std::size_t q = 0; q < pairs.train.size(); ++q) {
        const std::size_t p = pairs.train[q];
        ad::Tape tape;
        ad::TapeScope scope(tape);
        const auto out = model::fignn_forward_from_embedding(traj.snapshot(p), h_train[q], ctx, res.model);
        const auto terms = fignn_loss(out.x_next, traj.snapshot(p + 1), out.masks, loss_cfg);
        const ad::Tensor loss = ad::scale(terms.total, inv);
        total_sum += loss.item();
        mse_sum += terms.mse.item() * inv;
        for (std::size_t f = 0; f < nf; ++f) budgets[f] += terms.budgets[f].item() * inv;
        tape.backward(loss);
      }
    } catch (const NumericalDomainError&) {
      total_sum = std::numeric_limits<double>::quiet_NaN();
    } catch (const TrainingError&) {
      total_sum = std::numeric_limits<double>::quiet_NaN();
    }
    if (epoch == 0) res.initial_train_mse = mse_sum;
    if (diverging(total_sum, cfg.divergence_threshold)) {
      res.diverged = true;
      res.message = "fignn training diverged at step " + std::to_string(epoch) + " (loss " + num17(total_sum) + ")";
      res.model = last_good;
      return res;
    }
    last_good = res.model.clone();
    res.state.optimizer.step(params);
    res.state.step = epoch + 1;

    LogRow row;
    row.step = epoch;
    row.phase = Phase::Fignn;
    row.lambda = loss_cfg.lambda;
    row.rf = rf;
    row.train_mse = mse_sum;
    row.val_mse = std::numeric_limits<double>::quiet_NaN();
    row.budgets = budgets;
    const bool last = epoch + 1 == cfg.epochs;
    if (last || (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0)) {
      const double vl = val_loss(&row.val_mse);
      if (vl < res.state.best_val) {
        res.state.best_val = vl;
        best = res.model.clone();
      }
    }
    row.wall_ms = cfg.log_wall_time ? elapsed_ms(t0) : 0.0;
    res.log.push_back(std::move(row));
  }
  double final_mse = 0.0;
  for (std::size_t q = 0; q < pairs.train.size(); ++q) {
    const std::size_t p = pairs.train[q];
    const auto out = model::fignn_forward_from_embedding(traj.snapshot(p), h_train[q], ctx, res.model);
    final_mse += ad::mse(out.x_next, traj.snapshot(p + 1)).item() * inv;
  }
  res.final_train_mse = final_mse;
  if (cfg.epochs == 0) res.initial_train_mse = final_mse;
  if (std::isfinite(res.state.best_val)) res.model = best;
  return res;
}

void write_log_csv(const std::string& path, const std::vector<LogRow>& rows, std::size_t n_features) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write training log " + path);
  os << "step,phase,lambda,rf,train_mse,val_mse";
  for (std::size_t f = 0; f < n_features; ++f) os << ",budget_" << f;
  os << ",wall_ms\n";
  for (const auto& r : rows) {
    os << r.step << ',' << phase_name(r.phase) << ',' << num17(r.lambda) << ',' << r.rf << ',' << num17(r.train_mse)
       << ',' << (std::isnan(r.val_mse) ? std::string() : num17(r.val_mse));
    for (std::size_t f = 0; f < n_features; ++f) os << ',' << (f < r.budgets.size() ? num17(r.budgets[f]) : "");
    os << ',' << num17(r.wall_ms) << '\n';
  }
  if (!os) throw IoError("failed writing training log " + path);
}

}  // namespace fignn::train
