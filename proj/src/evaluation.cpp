#include "fignn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fignn/error.hpp"
#include "fignn/format.hpp"

namespace fignn::eval {

namespace fs = std::filesystem;
using json = nlohmann::json;

Fraction budget_fraction(std::span<const double> err_sq, const model::Mask& mask) {
  if (mask.binary.size() != err_sq.size()) {
    throw DimensionError("budget_fraction: mask over " + std::to_string(mask.binary.size()) + " nodes, errors over " +
                         std::to_string(err_sq.size()));
  }
  double in = 0.0, total = 0.0;
  for (std::size_t i = 0; i < err_sq.size(); ++i) {
    total += err_sq[i];
    if (mask.binary[i]) in += err_sq[i];
  }
  if (!(total > 0.0)) return {0.0, true};
  return {std::clamp(in / total, 0.0, 1.0), false};
}

BudgetRow budget_row(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<model::Mask>& masks,
                     std::size_t index) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("budget_row: prediction " + ad::shape_str(pred.shape()) + " vs target " +
                         ad::shape_str(target.shape()));
  }
  const std::size_t n = pred.rows(), nf = pred.cols();
  if (masks.size() != nf) throw ContractError("budget_row: one mask per feature required");
  BudgetRow row;
  row.index = index;
  double sse = 0.0, masked = 0.0;
  std::vector<double> err(n);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      const double e = pred.at(i, f) - target.at(i, f);
      err[i] = e * e;
    }
    FeatureBudget fb;
    const Fraction fr = budget_fraction(err, masks[f]);
    fb.budget_fraction = fr.value;
    fb.degenerate = fr.degenerate;
    for (std::size_t i = 0; i < n; ++i) {
      fb.sse += err[i];
      if (masks[f].binary[i]) fb.masked_sse += err[i];
    }
    fb.budget_value = fb.masked_sse / static_cast<double>(masks[f].size());
    sse += fb.sse;
    masked += fb.masked_sse;
    row.features.push_back(fb);
  }
  row.degenerate = !(sse > 0.0);
  row.total_fraction = row.degenerate ? 0.0 : std::clamp(masked / sse, 0.0, 1.0);
  return row;
}

BudgetRow aggregate_rows(const std::vector<BudgetRow>& rows) {
  BudgetRow agg;
  if (rows.empty()) {
    agg.degenerate = true;
    return agg;
  }
  const std::size_t nf = rows.front().features.size();
  agg.features.assign(nf, {});
  double sse = 0.0, masked = 0.0;
  for (const auto& r : rows) {
    for (std::size_t f = 0; f < nf; ++f) {
      agg.features[f].sse += r.features[f].sse;
      agg.features[f].masked_sse += r.features[f].masked_sse;
      agg.features[f].budget_value += r.features[f].budget_value / static_cast<double>(rows.size());
    }
  }
  for (auto& fb : agg.features) {
    fb.degenerate = !(fb.sse > 0.0);
    fb.budget_fraction = fb.degenerate ? 0.0 : std::clamp(fb.masked_sse / fb.sse, 0.0, 1.0);
    sse += fb.sse;
    masked += fb.masked_sse;
  }
  agg.degenerate = !(sse > 0.0);
  agg.total_fraction = agg.degenerate ? 0.0 : std::clamp(masked / sse, 0.0, 1.0);
  return agg;
}

BudgetReport single_step_report(const model::FignnModel& m, const data::Trajectory& traj,
                                const model::GraphContext& ctx, const std::vector<std::size_t>& pairs, Echo echo) {
  BudgetReport rep{echo.lambda, echo.rf, echo.seed, {}, {}};
  for (std::size_t p : pairs) {
    const auto out = model::fignn_forward(traj.snapshot(p), ctx, m);
    rep.rows.push_back(budget_row(out.x_next, traj.snapshot(p + 1), out.masks, p));
  }
  rep.aggregate = aggregate_rows(rep.rows);
  return rep;
}

// ---- rollout ---------------------------------------------------------------

RolloutResult rollout(const model::FignnModel& m, const ad::Tensor& x0, const model::GraphContext& ctx,
                      std::size_t steps) {
  if (steps < 1) throw ConfigError("rollout: steps must be >= 1");
  RolloutResult r;
  r.states.push_back(x0.detach());
  for (std::size_t t = 1; t <= steps; ++t) {
    try {
      auto out = model::fignn_forward(r.states.back(), ctx, m);
      r.states.push_back(out.x_next);
      r.masks.push_back(std::move(out.masks));
    } catch (const NumericalDomainError& e) {
      r.truncated = true;
      r.diagnostic = "non-finite state at step " + std::to_string(t) + ": " + e.what();
      break;
    }
  }
  return r;
}

RolloutResult rollout(const model::FignnModel& m, const data::Trajectory& traj, std::size_t start,
                      const model::GraphContext& ctx, std::size_t steps) {
  if (start + steps >= traj.steps) {
    throw ConfigError("rollout: " + std::to_string(steps) + " steps from snapshot " + std::to_string(start) +
                      " run past the trajectory end (" + std::to_string(traj.steps) + " snapshots)");
  }
  RolloutResult r = rollout(m, traj.snapshot(start), ctx, steps);
  for (std::size_t t = 1; t < r.states.size(); ++t) {
    const ad::Tensor truth = traj.snapshot(start + t);
    std::vector<double> per(traj.features, 0.0);
    for (std::size_t i = 0; i < traj.nodes; ++i) {
      for (std::size_t f = 0; f < traj.features; ++f) {
        const double e = r.states[t].at(i, f) - truth.at(i, f);
        per[f] += e * e;
      }
    }
    for (double& v : per) v /= static_cast<double>(traj.nodes);
    r.mse.push_back(std::move(per));
  }
  return r;
}

const char* mask_mode_name(MaskMode m) { return m == MaskMode::PerStep ? "per-step" : "frozen-first"; }

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "per-step") return MaskMode::PerStep;
  if (s == "frozen-first") return MaskMode::FrozenFirst;
  throw ConfigError("unknown mask mode '" + s + "' (expected per-step or frozen-first)");
}

BudgetReport rollout_report(const RolloutResult& r, const data::Trajectory& traj, std::size_t start, MaskMode mode,
                            Echo echo) {
  BudgetReport rep{echo.lambda, echo.rf, echo.seed, {}, {}};
  for (std::size_t t = 1; t < r.states.size(); ++t) {
    const auto& masks = mode == MaskMode::PerStep ? r.masks[t - 1] : r.masks.front();
    rep.rows.push_back(budget_row(r.states[t], traj.snapshot(start + t), masks, t));
  }
  rep.aggregate = aggregate_rows(rep.rows);
  return rep;
}

// ---- mask statistics -------------------------------------------------------

double mask_coherence(const model::Mask& mask, const graph::Graph& g) {
  if (mask.binary.size() != g.num_nodes()) throw DimensionError("mask_coherence: mask/graph size mismatch");
  if (g.num_edges() == 0) return 1.0;
  std::size_t same = 0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) same += mask.binary[g.src()[e]] == mask.binary[g.dst()[e]];
  return static_cast<double>(same) / static_cast<double>(g.num_edges());
}

double jaccard(const model::Mask& a, const model::Mask& b) {
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.keep.size() && j < b.keep.size()) {
    if (a.keep[i] == b.keep[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a.keep[i] < b.keep[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.keep.size() + b.keep.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MaskStats mask_stats(const std::vector<std::vector<model::Mask>>& masks, const graph::Graph& g) {
  MaskStats st;
  if (masks.empty()) return st;
  const std::size_t nf = masks.front().size();
  const auto ns = static_cast<double>(masks.size());
  st.coherence.assign(nf, 0.0);
  st.stability.assign(nf, 1.0);
  st.overlap.assign(nf, std::vector<double>(nf, 0.0));
  for (const auto& snap : masks) {
    for (std::size_t f = 0; f < nf; ++f) {
      st.coherence[f] += mask_coherence(snap[f], g) / ns;
      for (std::size_t h = 0; h < nf; ++h) st.overlap[f][h] += (f == h ? 1.0 : jaccard(snap[f], snap[h])) / ns;
    }
  }
  if (masks.size() > 1) {
    for (std::size_t f = 0; f < nf; ++f) {
      double acc = 0.0;
      for (std::size_t s = 1; s < masks.size(); ++s) acc += jaccard(masks[s - 1][f], masks[s][f]);
      st.stability[f] = acc / static_cast<double>(masks.size() - 1);
    }
  }
  for (double c : st.coherence) st.mean_coherence += c / static_cast<double>(nf);
  return st;
}

std::vector<std::vector<model::Mask>> snapshot_masks(const model::FignnModel& m, const data::Trajectory& traj,
                                                     const model::GraphContext& ctx,
                                                     const std::vector<std::size_t>& pairs) {
  std::vector<std::vector<model::Mask>> out;
  for (std::size_t p : pairs) out.push_back(model::fignn_forward(traj.snapshot(p), ctx, m).masks);
  return out;
}

// ---- report files ----------------------------------------------------------

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::trunc | std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

void close_out(std::ofstream& os, const fs::path& p) {
  os.flush();
  if (!os) throw IoError("failed writing " + p.string());
}

json row_json(const BudgetRow& row, const std::vector<std::string>& names) {
  json feats = json::object();
  for (std::size_t f = 0; f < row.features.size(); ++f) {
    const auto& fb = row.features[f];
    feats[names[f]] = {{"budget_value", fb.budget_value},
                       {"budget_fraction", fb.budget_fraction},
                       {"sse", fb.sse},
                       {"masked_sse", fb.masked_sse},
                       {"degenerate", fb.degenerate}};
  }
  return {{"features", feats}, {"total_fraction", row.total_fraction}, {"degenerate", row.degenerate}};
}

void write_json(const fs::path& p, const json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
  close_out(os, p);
}

}  // namespace

void write_budget_csv(const fs::path& p, const BudgetReport& rep, const std::vector<std::string>& names,
                      const std::string& index_col, const std::vector<std::vector<double>>* mse) {
  auto os = open_out(p);
  os << index_col;
  for (const auto& n : names) os << ",budget_value_" << n << ",budget_fraction_" << n;
  if (mse) {
    for (const auto& n : names) os << ",mse_" << n;
  }
  os << ",total_fraction\n";
  for (std::size_t r = 0; r < rep.rows.size(); ++r) {
    const auto& row = rep.rows[r];
    os << row.index;
    for (const auto& fb : row.features) os << ',' << num17(fb.budget_value) << ',' << num17(fb.budget_fraction);
    if (mse) {
      for (double v : (*mse)[r]) os << ',' << num17(v);
    }
    os << ',' << num17(row.total_fraction) << '\n';
  }
  close_out(os, p);
}

void write_mask_csv(const fs::path& p, const std::vector<model::Mask>& masks, const std::vector<std::string>& names) {
  auto os = open_out(p);
  os << "node";
  for (const auto& n : names) os << ",mask_" << n;
  os << '\n';
  const std::size_t n = masks.front().binary.size();
  for (std::size_t i = 0; i < n; ++i) {
    os << i;
    for (const auto& m : masks) os << ',' << static_cast<int>(m.binary[i]);
    os << '\n';
  }
  close_out(os, p);
}

std::string lambda_dirname(double lambda) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", lambda);
  return buf;
}

fs::path cell_dir(const SweepConfig& cfg, double lambda, std::size_t rf, std::uint64_t seed) {
  return cfg.out_root / cfg.dataset / lambda_dirname(lambda) / std::to_string(rf) / std::to_string(seed);
}

CellSummary evaluate_cell(const train::TrainResult& trained, const data::Trajectory& traj,
                          const data::DatasetSplit& split, const model::GraphContext& ctx, const SweepConfig& cfg,
                          Echo echo) {
  const auto& m = trained.model;
  const auto& names = traj.feature_names;
  const auto pairs = train::strided(split.test_begin, split.test_end, cfg.max_test_pairs);
  if (pairs.empty()) throw ConfigError("evaluation: the split has no test pairs");

  const BudgetReport single = single_step_report(m, traj, ctx, pairs, echo);
  const auto snap_masks = snapshot_masks(m, traj, ctx, pairs);
  const MaskStats stats = mask_stats(snap_masks, ctx.graph);
  const double test_mse = train::fignn_mse(m, traj, ctx, pairs);

  const std::size_t start = split.test_begin;
  const std::size_t steps = std::min(cfg.rollout_steps, traj.steps - 1 - start);
  const RolloutResult roll = rollout(m, traj, start, ctx, std::max<std::size_t>(steps, 1));
  const BudgetReport rolled = rollout_report(roll, traj, start, cfg.mask_mode, echo);

  const fs::path final_dir = cell_dir(cfg, echo.lambda, echo.rf, echo.seed);
  fs::path tmp = final_dir;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  write_budget_csv(tmp / "budget_single.csv", single, names, "pair", nullptr);
  write_budget_csv(tmp / "budget_rollout.csv", rolled, names, "step", &roll.mse);
  for (std::size_t t = 1; t <= roll.masks.size(); ++t) {
    write_mask_csv(tmp / ("masks_step" + std::to_string(t) + ".csv"), roll.masks[t - 1], names);
  }
  train::write_log_csv((tmp / "train_log.csv").string(), trained.log, names.size());

  json s;
  s["dataset"] = cfg.dataset;
  s["lambda"] = echo.lambda;
  s["rf"] = echo.rf;
  s["seed"] = echo.seed;
  s["feature_names"] = names;
  s["mask_mode"] = mask_mode_name(cfg.mask_mode);
  s["test_pairs"] = pairs;
  s["test_mse"] = test_mse;
  s["single_step"] = row_json(single.aggregate, names);
  s["rollout"] = row_json(rolled.aggregate, names);
  s["rollout_mse"] = roll.mse;
  s["rollout_truncated"] = roll.truncated;
  s["rollout_diagnostic"] = roll.diagnostic;
  s["mask_coherence"] = stats.coherence;
  s["mean_mask_coherence"] = stats.mean_coherence;
  s["mask_stability"] = stats.stability;
  s["mask_overlap"] = stats.overlap;
  s["train"] = {{"initial_train_mse", trained.initial_train_mse},
                {"final_train_mse", trained.final_train_mse},
                {"best_val", trained.state.best_val},
                {"steps", trained.state.step},
                {"diverged", trained.diverged},
                {"message", trained.message}};
  write_json(tmp / "summary.json", s);

  fs::remove_all(final_dir);
  fs::create_directories(final_dir.parent_path());
  fs::rename(tmp, final_dir);

  CellSummary cs;
  cs.lambda = echo.lambda;
  cs.rf = echo.rf;
  cs.seed = echo.seed;
  cs.ok = !trained.diverged;
  cs.error = trained.message;
  cs.dir = final_dir;
  cs.test_mse = test_mse;
  cs.total_fraction = single.aggregate.total_fraction;
  cs.mean_coherence = stats.mean_coherence;
  return cs;
}

std::vector<CellSummary> run_sweep(const model::FignnModel& baseline, const data::Trajectory& traj,
                                   const data::DatasetSplit& split, const model::GraphContext& ctx,
                                   const SweepConfig& cfg) {
  std::vector<CellSummary> cells;
  for (double lambda : cfg.lambdas) {
    for (std::size_t rf : cfg.rfs) {
      for (std::uint64_t seed : cfg.seeds) {
        const Echo echo{lambda, rf, seed};
        try {
          train::LossConfig loss{lambda, cfg.eps};
          const auto trained = train::train_fignn(baseline, traj, split, ctx, loss, rf, cfg.train, seed);
          cells.push_back(evaluate_cell(trained, traj, split, ctx, cfg, echo));
        } catch (const std::exception& e) {
          CellSummary cs;
          cs.lambda = lambda;
          cs.rf = rf;
          cs.seed = seed;
          cs.error = e.what();
          cs.dir = cell_dir(cfg, lambda, rf, seed);
          cells.push_back(cs);
        }
      }
    }
  }
  return cells;
}

// ---- field export ----------------------------------------------------------

void export_fields(const RolloutResult& r, const graph::Graph& g, const std::vector<std::string>& names,
                   const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const std::size_t n = g.num_nodes();
  for (std::size_t t = 1; t < r.states.size(); ++t) {
    const auto& x = r.states[t];
    const auto& masks = r.masks[t - 1];
    if (x.rows() != n || x.cols() != names.size()) throw DimensionError("export_fields: state/graph mismatch");
    const fs::path p = out_dir / ("fields_step" + std::to_string(t) + ".csv");
    auto os = open_out(p);
    os << "node,x,y";
    for (const auto& nm : names) os << ',' << nm;
    for (const auto& nm : names) os << ",mask_" << nm;
    os << '\n';
    for (std::size_t i = 0; i < n; ++i) {
      os << i << ',' << num17(g.coords()[i][0]) << ',' << num17(g.coords()[i][1]);
      for (std::size_t f = 0; f < names.size(); ++f) os << ',' << num17(x.at(i, f));
      for (const auto& m : masks) os << ',' << static_cast<int>(m.binary[i]);
      os << '\n';
    }
    close_out(os, p);
  }
  json s;
  s["feature_names"] = names;
  s["steps"] = r.steps();
  s["nodes"] = n;
  s["mse"] = r.mse;
  s["truncated"] = r.truncated;
  s["diagnostic"] = r.diagnostic;
  std::vector<std::vector<std::size_t>> sizes;
  for (const auto& ms : r.masks) {
    std::vector<std::size_t> row;
    for (const auto& m : ms) row.push_back(m.size());
    sizes.push_back(row);
  }
  s["mask_sizes"] = sizes;
  write_json(out_dir / "summary.json", s);
}

FieldTable read_fields_csv(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot read " + file.string());
  std::string line;
  std::getline(is, line);
  std::size_t cols = 1;
  for (char c : line) cols += c == ',';
  if (cols < 3 || (cols - 3) % 2 != 0) throw IoError(file.string() + ": unexpected header");
  const std::size_t nf = (cols - 3) / 2;
  FieldTable t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> v;
    while (std::getline(ss, cell, ',')) v.push_back(cell);
    if (v.size() != cols) throw IoError(file.string() + ": ragged row");
    t.node.push_back(std::stoull(v[0]));
    t.x.push_back(std::strtod(v[1].c_str(), nullptr));
    t.y.push_back(std::strtod(v[2].c_str(), nullptr));
    std::vector<double> vals;
    std::vector<std::uint8_t> bits;
    for (std::size_t f = 0; f < nf; ++f) vals.push_back(std::strtod(v[3 + f].c_str(), nullptr));
    for (std::size_t f = 0; f < nf; ++f) bits.push_back(static_cast<std::uint8_t>(std::stoi(v[3 + nf + f])));
    t.values.push_back(std::move(vals));
    t.masks.push_back(std::move(bits));
  }
  return t;
}

}  // namespace fignn::eval
