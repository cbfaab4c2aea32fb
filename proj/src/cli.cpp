#include "fignn/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>

#include "fignn/error.hpp"
#include "fignn/evaluation.hpp"
#include "fignn/experiment.hpp"
#include "fignn/io.hpp"

namespace fignn::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using exp::RunConfig;

namespace {

/// Missing or unusable inputs; maps to exit status 2.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error("usage", what) {}
};

fs::path resolve(const fs::path& p) {
  const char* root = std::getenv("FIGNN_OUT");
  if (root == nullptr || *root == '\0' || p.is_absolute()) return p;
  return fs::path(root) / p;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw UsageError("missing " + what + ": " + p.string());
}

/// Flag values applied on top of the merged JSON config, only when given.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& name, const std::string& desc,
                   std::function<void(RunConfig&, const T&)> set) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, desc);
    appliers_.push_back([opt, value, set](RunConfig& c) {
      if (opt->count() > 0) set(c, *value);
    });
    return opt;
  }
  void apply(RunConfig& c) const {
    for (const auto& f : appliers_) f(c);
  }

 private:
  std::vector<std::function<void(RunConfig&)>> appliers_;
};

struct Common {
  std::string config_file;
  std::string data_dir;
  std::string preset;
  Overrides overrides;
};

/// preset defaults <- dataset run_config.json <- --config file <- flags.
RunConfig resolve_config(const Common& c) {
  std::optional<json> from_data;
  if (!c.data_dir.empty()) {
    const fs::path p = resolve(c.data_dir) / "run_config.json";
    if (fs::exists(p)) from_data = io::read_json(p);
  }
  std::optional<json> from_file;
  if (!c.config_file.empty()) {
    const fs::path p = resolve(c.config_file);
    require_file(p, "config file");
    from_file = io::read_json(p);
  }
  std::string name = c.preset;
  auto preset_of = [](const std::optional<json>& j) -> std::string {
    if (j && j->contains("dataset") && j->at("dataset").contains("preset"))
      return j->at("dataset").at("preset").get<std::string>();
    return {};
  };
  if (name.empty()) name = preset_of(from_file);
  if (name.empty()) name = preset_of(from_data);
  if (name.empty()) name = "speedy-toy";
  RunConfig cfg = exp::preset(name);
  if (from_data) cfg = exp::from_json(*from_data, cfg);
  if (from_file) cfg = exp::from_json(*from_file, cfg);
  cfg.dataset.preset = name;
  c.overrides.apply(cfg);
  cfg.validate();
  return cfg;
}

io::Dataset load_data(const Common& c) {
  if (c.data_dir.empty()) throw UsageError("--data is required");
  const fs::path dir = resolve(c.data_dir);
  require_file(dir / "meta.json", "dataset");
  return io::load_dataset(dir);
}

void write_config(const fs::path& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  io::write_json(dir / "run_config.json", exp::to_json(cfg));
}

void print(std::ostream& out, const json& j) { out << j.dump() << '\n'; }

void add_common(CLI::App* app, Common& c, bool with_data) {
  app->add_option("--config", c.config_file, "JSON RunConfig; flags override its fields");
  if (with_data) app->add_option("--data", c.data_dir, "dataset directory written by generate-data");
}

void add_model_flags(CLI::App* app, Overrides& ov) {
  ov.add<std::size_t>(app, "--hidden", "embedding width", [](RunConfig& c, const std::size_t& v) { c.model.hidden = v; });
  ov.add<std::size_t>(app, "--levels", "coarsen-refine cycles", [](RunConfig& c, const std::size_t& v) { c.model.levels = v; });
  ov.add<std::size_t>(app, "--rf", "reduction factor", [](RunConfig& c, const std::size_t& v) { c.model.rf = v; });
  ov.add<std::uint64_t>(app, "--init-seed", "weight initialisation seed",
                        [](RunConfig& c, const std::uint64_t& v) { c.model.init_seed = v; });
  ov.add<std::string>(app, "--score-mode", "dot | normalized",
                      [](RunConfig& c, const std::string& v) { c.model.score_mode = io::parse_score_mode(v); });
}

void add_train_flags(CLI::App* app, Overrides& ov, bool fignn) {
  auto pick = [fignn](RunConfig& c) -> train::TrainConfig& { return fignn ? c.fignn_train : c.baseline_train; };
  ov.add<std::size_t>(app, "--epochs", "optimiser steps", [pick](RunConfig& c, const std::size_t& v) { pick(c).epochs = v; });
  ov.add<double>(app, "--lr", "learning rate", [pick](RunConfig& c, const double& v) { pick(c).lr = v; });
  ov.add<std::size_t>(app, "--train-pairs", "snapshot pairs per epoch",
                      [pick](RunConfig& c, const std::size_t& v) { pick(c).max_train_pairs = v; });
}

void add_eval_flags(CLI::App* app, Overrides& ov) {
  ov.add<std::size_t>(app, "--test-pairs", "maximum test pairs evaluated",
                      [](RunConfig& c, const std::size_t& v) { c.max_test_pairs = v; });
  ov.add<std::string>(app, "--mask-mode", "per-step | frozen-first",
                      [](RunConfig& c, const std::string& v) { c.mask_mode = eval::parse_mask_mode(v); });
}

std::vector<std::size_t> test_pairs(const io::Dataset& ds, const RunConfig& cfg) {
  return train::strided(ds.split.test_begin, ds.split.test_end, cfg.max_test_pairs);
}

io::Checkpoint load_ckpt(const std::string& dir, const char* what) {
  if (dir.empty()) throw UsageError(std::string("--") + what + " is required");
  const fs::path p = resolve(dir);
  require_file(p / "manifest.json", std::string(what) + " checkpoint");
  require_file(p / "weights.bin", std::string(what) + " checkpoint weights");
  return io::load_checkpoint(p);
}

/// Keeps the checkpoint architecture, taking rf and score mode from the run.
void adopt_checkpoint_model(RunConfig& cfg, model::FignnModel& m) {
  model::ModelConfig mc = m.config();
  mc.rf = cfg.model.rf;
  mc.score_mode = cfg.model.score_mode;
  m.set_rf(mc.rf);
  m.set_score_mode(mc.score_mode);
  cfg.model = mc;
}

json train_summary(const train::TrainResult& r) {
  return {{"initial_train_mse", r.initial_train_mse},
          {"final_train_mse", r.final_train_mse},
          {"best_val", r.state.best_val},
          {"steps", r.state.step},
          {"diverged", r.diverged},
          {"message", r.message}};
}

json row_json(const eval::BudgetRow& row, const std::vector<std::string>& names) {
  json feats = json::object();
  for (std::size_t f = 0; f < row.features.size(); ++f) {
    feats[names[f]] = {{"budget_value", row.features[f].budget_value},
                       {"budget_fraction", row.features[f].budget_fraction}};
  }
  return {{"features", feats}, {"total_fraction", row.total_fraction}, {"degenerate", row.degenerate}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"FIGNN: feature-specific interpretable graph network surrogate", "fignn"};
  app.require_subcommand(1);
  std::function<void()> action;

  // generate-data
  Common gen;
  std::string gen_out;
  auto* g = app.add_subcommand("generate-data", "generate a synthetic trajectory");
  add_common(g, gen, false);
  g->add_option("--preset", gen.preset, "speedy-toy | bfs-toy");
  g->add_option("--out", gen_out, "output directory (default data/<preset>-seed<seed>)");
  gen.overrides.add<std::uint64_t>(g, "--seed", "generator seed",
                                   [](RunConfig& c, const std::uint64_t& v) { c.dataset.seed = v; });
  gen.overrides.add<std::size_t>(g, "--steps", "snapshots", [](RunConfig& c, const std::size_t& v) { c.dataset.steps = v; });
  g->callback([&] {
    action = [&] {
      const RunConfig cfg = resolve_config(gen);
      const fs::path dir = resolve(gen_out.empty() ? "data/" + cfg.dataset.preset + "-seed" +
                                                         std::to_string(cfg.dataset.seed)
                                                   : gen_out);
      const io::Dataset ds = exp::make_dataset(cfg);
      io::save_dataset(dir, ds);
      write_config(dir, cfg);
      const auto& t = ds.trajectory;
      print(out, {{"command", "generate-data"},
                  {"out", dir.string()},
                  {"shape", {t.steps, t.nodes, t.features}},
                  {"train_pairs", ds.split.train_pairs()},
                  {"test_pairs", ds.split.test_pairs()}});
    };
  });

  // build-graph
  Common bg;
  std::string bg_out;
  auto* b = app.add_subcommand("build-graph", "build the graph and coarsening hierarchy of a dataset");
  add_common(b, bg, true);
  b->add_option("--out", bg_out, "graph file (default <data>/graph.json)");
  bg.overrides.add<std::size_t>(b, "--k", "k-NN neighbours", [](RunConfig& c, const std::size_t& v) { c.graph.k = v; });
  bg.overrides.add<double>(b, "--period-x", "periodic x extent (0 = off)",
                           [](RunConfig& c, const double& v) { c.graph.period_x = v; });
  bg.overrides.add<std::size_t>(b, "--levels", "coarsening levels",
                                [](RunConfig& c, const std::size_t& v) { c.model.levels = v; });
  b->callback([&] {
    action = [&] {
      const io::Dataset ds = load_data(bg);
      const RunConfig cfg = resolve_config(bg);
      const auto ctx = exp::make_context(ds, cfg);
      const fs::path file = bg_out.empty() ? resolve(bg.data_dir) / "graph.json" : resolve(bg_out);
      io::save_graph(file, ctx.graph, &ctx.hierarchy);
      json levels = json::array();
      levels.push_back({{"nodes", ctx.graph.num_nodes()}, {"edges", ctx.graph.num_edges()},
                        {"char_length", ctx.graph.char_length()}});
      for (const auto& lv : ctx.hierarchy.levels) {
        levels.push_back({{"nodes", lv.num_clusters()}, {"edges", lv.graph.num_edges()}, {"char_length", lv.char_length}});
      }
      print(out, {{"command", "build-graph"}, {"out", file.string()}, {"levels", levels}});
    };
  });

  // train-baseline
  Common tb;
  std::string tb_out = "runs/baseline";
  auto* tbc = app.add_subcommand("train-baseline", "train the baseline surrogate");
  add_common(tbc, tb, true);
  tbc->add_option("--out", tb_out, "checkpoint directory")->capture_default_str();
  add_model_flags(tbc, tb.overrides);
  add_train_flags(tbc, tb.overrides, false);
  tbc->callback([&] {
    action = [&] {
      const io::Dataset ds = load_data(tb);
      RunConfig cfg = resolve_config(tb);
      if (cfg.model.n_features != ds.trajectory.features) {
        throw ConfigError("model.n_features is " + std::to_string(cfg.model.n_features) + " but the dataset has " +
                          std::to_string(ds.trajectory.features) + " features");
      }
      const auto ctx = exp::make_context(ds, cfg);
      auto res = train::train_baseline(ds.trajectory, ds.split, ctx, cfg.model, cfg.baseline_train);
      const fs::path dir = resolve(tb_out);
      json extra = train_summary(res);
      extra["test_mse"] = train::baseline_mse(res.model, ds.trajectory, ctx, test_pairs(ds, cfg));
      io::save_checkpoint(dir, res.model, train::Phase::Baseline, extra);
      train::write_log_csv((dir / "train_log.csv").string(), res.log, cfg.model.n_features);
      write_config(dir, cfg);
      if (res.diverged) throw TrainingError(res.message + "; last good checkpoint written to " + dir.string());
      print(out, {{"command", "train-baseline"}, {"out", dir.string()}, {"summary", extra}});
    };
  });

  // train-fignn
  Common tf;
  std::string tf_out = "runs/fignn", tf_base;
  auto* tfc = app.add_subcommand("train-fignn", "train the feature-specific branches on a frozen baseline");
  add_common(tfc, tf, true);
  tfc->add_option("--baseline", tf_base, "baseline checkpoint directory");
  tfc->add_option("--out", tf_out, "checkpoint directory")->capture_default_str();
  tf.overrides.add<double>(tfc, "--lambda", "budget weight", [](RunConfig& c, const double& v) { c.loss.lambda = v; });
  tf.overrides.add<std::uint64_t>(tfc, "--seed", "branch initialisation seed",
                                  [](RunConfig& c, const std::uint64_t& v) { c.fignn_seed = v; });
  tf.overrides.add<std::size_t>(tfc, "--rf", "reduction factor", [](RunConfig& c, const std::size_t& v) { c.model.rf = v; });
  tf.overrides.add<std::string>(tfc, "--score-mode", "dot | normalized",
                                [](RunConfig& c, const std::string& v) { c.model.score_mode = io::parse_score_mode(v); });
  add_train_flags(tfc, tf.overrides, true);
  tfc->callback([&] {
    action = [&] {
      auto ck = load_ckpt(tf_base, "baseline");
      const io::Dataset ds = load_data(tf);
      RunConfig cfg = resolve_config(tf);
      adopt_checkpoint_model(cfg, ck.model);
      const auto ctx = exp::make_context(ds, cfg);
      auto res = train::train_fignn(ck.model, ds.trajectory, ds.split, ctx, cfg.loss, cfg.model.rf, cfg.fignn_train,
                                    cfg.fignn_seed);
      const fs::path dir = resolve(tf_out);
      json extra = train_summary(res);
      extra["lambda"] = cfg.loss.lambda;
      extra["test_mse"] = train::fignn_mse(res.model, ds.trajectory, ctx, test_pairs(ds, cfg));
      io::save_checkpoint(dir, res.model, train::Phase::Fignn, extra);
      train::write_log_csv((dir / "train_log.csv").string(), res.log, cfg.model.n_features);
      write_config(dir, cfg);
      if (res.diverged) throw TrainingError(res.message + "; last good checkpoint written to " + dir.string());
      print(out, {{"command", "train-fignn"}, {"out", dir.string()}, {"summary", extra}});
    };
  });

  // rollout
  Common ro;
  std::string ro_out = "runs/rollout", ro_ckpt;
  long long ro_start = -1;
  auto* roc = app.add_subcommand("rollout", "autoregressive rollout with per-step masks and budgets");
  add_common(roc, ro, true);
  roc->add_option("--checkpoint", ro_ckpt, "FIGNN checkpoint directory");
  roc->add_option("--out", ro_out, "output directory")->capture_default_str();
  roc->add_option("--start", ro_start, "initial snapshot (default: first test snapshot)");
  ro.overrides.add<std::size_t>(roc, "--steps", "rollout steps", [](RunConfig& c, const std::size_t& v) { c.rollout_steps = v; });
  add_eval_flags(roc, ro.overrides);
  roc->callback([&] {
    action = [&] {
      auto ck = load_ckpt(ro_ckpt, "checkpoint");
      const io::Dataset ds = load_data(ro);
      RunConfig cfg = resolve_config(ro);
      cfg.model = ck.model.config();
      const auto ctx = exp::make_context(ds, cfg);
      const std::size_t start = ro_start < 0 ? ds.split.test_begin : static_cast<std::size_t>(ro_start);
      const auto r = eval::rollout(ck.model, ds.trajectory, start, ctx, cfg.rollout_steps);
      const fs::path dir = resolve(ro_out);
      eval::export_fields(r, ctx.graph, ds.trajectory.feature_names, dir);
      const eval::Echo echo{ck.extra.value("lambda", 0.0), cfg.model.rf, cfg.fignn_seed};
      const auto rep = eval::rollout_report(r, ds.trajectory, start, cfg.mask_mode, echo);
      eval::write_budget_csv(dir / "budget_rollout.csv", rep, ds.trajectory.feature_names, "step", &r.mse);
      write_config(dir, cfg);
      print(out, {{"command", "rollout"},
                  {"out", dir.string()},
                  {"steps", r.steps()},
                  {"truncated", r.truncated},
                  {"total_fraction", rep.aggregate.total_fraction}});
    };
  });

  // sweep
  Common sw;
  std::string sw_out = "reports", sw_base, sw_name;
  auto* swc = app.add_subcommand("sweep", "train and evaluate one FIGNN per (lambda, rf, seed) cell");
  add_common(swc, sw, true);
  swc->add_option("--baseline", sw_base, "baseline checkpoint directory");
  swc->add_option("--out", sw_out, "report root")->capture_default_str();
  swc->add_option("--dataset-name", sw_name, "report sub-directory (default: preset name)");
  sw.overrides.add<std::vector<double>>(swc, "--lambdas", "comma-separated budget weights",
                                        [](RunConfig& c, const std::vector<double>& v) { c.lambdas = v; })
      ->delimiter(',');
  sw.overrides.add<std::vector<std::size_t>>(swc, "--rfs", "comma-separated reduction factors",
                                             [](RunConfig& c, const std::vector<std::size_t>& v) { c.rfs = v; })
      ->delimiter(',');
  sw.overrides.add<std::vector<std::uint64_t>>(swc, "--seeds", "comma-separated branch seeds",
                                               [](RunConfig& c, const std::vector<std::uint64_t>& v) { c.seeds = v; })
      ->delimiter(',');
  add_train_flags(swc, sw.overrides, true);
  add_eval_flags(swc, sw.overrides);
  swc->callback([&] {
    action = [&] {
      auto ck = load_ckpt(sw_base, "baseline");
      const io::Dataset ds = load_data(sw);
      RunConfig cfg = resolve_config(sw);
      adopt_checkpoint_model(cfg, ck.model);
      const auto ctx = exp::make_context(ds, cfg);
      const std::string name = sw_name.empty() ? cfg.dataset.preset : sw_name;
      const auto scfg = exp::sweep_config(cfg, name, resolve(sw_out));
      write_config(scfg.out_root / name, cfg);
      const auto cells = eval::run_sweep(ck.model, ds.trajectory, ds.split, ctx, scfg);
      json list = json::array();
      std::size_t failed = 0;
      for (const auto& c : cells) {
        failed += c.ok ? 0 : 1;
        list.push_back({{"lambda", c.lambda},
                        {"rf", c.rf},
                        {"seed", c.seed},
                        {"ok", c.ok},
                        {"error", c.error},
                        {"dir", c.dir.string()},
                        {"test_mse", c.test_mse},
                        {"total_fraction", c.total_fraction},
                        {"mean_coherence", c.mean_coherence}});
      }
      io::write_json(scfg.out_root / name / "sweep_summary.json", list);
      print(out, {{"command", "sweep"}, {"cells", cells.size()}, {"failed", failed},
                  {"out", (scfg.out_root / name).string()}});
      if (failed > 0) throw TrainingError(std::to_string(failed) + " sweep cell(s) failed; see sweep_summary.json");
    };
  });

  // budget-report
  Common br;
  std::string br_out = "runs/budget", br_ckpt;
  auto* brc = app.add_subcommand("budget-report", "single-step error budgets over the test pairs");
  add_common(brc, br, true);
  brc->add_option("--checkpoint", br_ckpt, "FIGNN checkpoint directory");
  brc->add_option("--out", br_out, "output directory")->capture_default_str();
  add_eval_flags(brc, br.overrides);
  brc->callback([&] {
    action = [&] {
      auto ck = load_ckpt(br_ckpt, "checkpoint");
      const io::Dataset ds = load_data(br);
      RunConfig cfg = resolve_config(br);
      cfg.model = ck.model.config();
      const auto ctx = exp::make_context(ds, cfg);
      const auto pairs = test_pairs(ds, cfg);
      const eval::Echo echo{ck.extra.value("lambda", 0.0), cfg.model.rf, cfg.fignn_seed};
      const auto rep = eval::single_step_report(ck.model, ds.trajectory, ctx, pairs, echo);
      const auto stats = eval::mask_stats(eval::snapshot_masks(ck.model, ds.trajectory, ctx, pairs), ctx.graph);
      const fs::path dir = resolve(br_out);
      fs::create_directories(dir);
      eval::write_budget_csv(dir / "budget_single.csv", rep, ds.trajectory.feature_names, "pair");
      json s = {{"single_step", row_json(rep.aggregate, ds.trajectory.feature_names)},
                {"mask_coherence", stats.coherence},
                {"mask_stability", stats.stability},
                {"mask_overlap", stats.overlap},
                {"test_pairs", pairs}};
      io::write_json(dir / "summary.json", s);
      write_config(dir, cfg);
      print(out, {{"command", "budget-report"}, {"out", dir.string()}, {"total_fraction", rep.aggregate.total_fraction}});
    };
  });

  // export-masks
  Common em;
  std::string em_out = "runs/masks", em_ckpt;
  auto* emc = app.add_subcommand("export-masks", "write each test snapshot's feature masks");
  add_common(emc, em, true);
  emc->add_option("--checkpoint", em_ckpt, "FIGNN checkpoint directory");
  emc->add_option("--out", em_out, "output directory")->capture_default_str();
  add_eval_flags(emc, em.overrides);
  emc->callback([&] {
    action = [&] {
      auto ck = load_ckpt(em_ckpt, "checkpoint");
      const io::Dataset ds = load_data(em);
      RunConfig cfg = resolve_config(em);
      cfg.model = ck.model.config();
      const auto ctx = exp::make_context(ds, cfg);
      const auto pairs = test_pairs(ds, cfg);
      const auto masks = eval::snapshot_masks(ck.model, ds.trajectory, ctx, pairs);
      const fs::path dir = resolve(em_out);
      fs::create_directories(dir);
      for (std::size_t s = 0; s < pairs.size(); ++s) {
        eval::write_mask_csv(dir / ("masks_pair" + std::to_string(pairs[s]) + ".csv"), masks[s],
                             ds.trajectory.feature_names);
      }
      const auto stats = eval::mask_stats(masks, ctx.graph);
      io::write_json(dir / "mask_stats.json", {{"pairs", pairs},
                                               {"coherence", stats.coherence},
                                               {"stability", stats.stability},
                                               {"overlap", stats.overlap}});
      write_config(dir, cfg);
      print(out, {{"command", "export-masks"}, {"out", dir.string()}, {"snapshots", pairs.size()}});
    };
  });

  // count-params
  Common cp;
  std::string cp_ckpt;
  auto* cpc = app.add_subcommand("count-params", "parameter counts per component");
  add_common(cpc, cp, false);
  cpc->add_option("--preset", cp.preset, "speedy-toy | bfs-toy");
  cpc->add_option("--checkpoint", cp_ckpt, "count a stored checkpoint instead");
  add_model_flags(cpc, cp.overrides);
  cp.overrides.add<std::size_t>(cpc, "--features", "output features",
                                [](RunConfig& c, const std::size_t& v) { c.model.n_features = v; });
  cpc->callback([&] {
    action = [&] {
      model::FignnModel m;
      if (!cp_ckpt.empty()) {
        m = load_ckpt(cp_ckpt, "checkpoint").model;
      } else {
        m = model::FignnModel(resolve_config(cp).model);
      }
      const auto counted = model::count_parameters(m);
      const auto analytic = model::analytic_parameter_count(m.config());
      print(out, {{"command", "count-params"},
                  {"config", io::to_json(m.config())},
                  {"encoder", counted.encoder},
                  {"processor", counted.processor},
                  {"decoder", counted.decoder},
                  {"branches", counted.branches},
                  {"baseline", counted.baseline()},
                  {"total", counted.total()},
                  {"analytic_total", analytic.total()},
                  {"match", counted.total() == analytic.total()}});
    };
  });

  auto report = [&err](const std::string& kind, const std::string& msg) {
    err << json{{"error", {{"kind", kind}, {"message", msg}}}}.dump() << '\n';
  };
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report("usage", e.what());
    return kUsage;
  }
  try {
    if (action) action();
    return kOk;
  } catch (const UsageError& e) {
    report(e.kind(), e.what());
    return kUsage;
  } catch (const ConfigError& e) {
    report(e.kind(), e.what());
    return kUsage;
  } catch (const Error& e) {
    report(e.kind(), e.what());
    return kRuntime;
  } catch (const std::exception& e) {
    report("runtime", e.what());
    return kRuntime;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace fignn::cli
