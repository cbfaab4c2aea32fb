#include "fignn/experiment.hpp"

#include <initializer_list>

#include "fignn/error.hpp"

namespace fignn::exp {

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(std::string("config: '") + section + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("config: unknown key '") + key + "' in '" + section + "'");
  }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  if (dataset.preset != "speedy-toy" && dataset.preset != "bfs-toy") {
    throw ConfigError("unknown preset '" + dataset.preset + "' (expected speedy-toy or bfs-toy)");
  }
  if (!(dataset.train_fraction > 0.0 && dataset.train_fraction < 1.0)) {
    throw ConfigError("dataset.train_fraction must lie in (0, 1)");
  }
  model.validate();
  loss.validate();
  if (rollout_steps < 1) throw ConfigError("rollout_steps must be >= 1");
  for (std::size_t rf : rfs) {
    if (rf < 1) throw ConfigError("every rf must be >= 1");
  }
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw ConfigError("every lambda must be >= 0");
  }
}

RunConfig preset(const std::string& name) {
  RunConfig c;
  c.dataset.preset = name;
  c.model.hidden = 16;
  c.model.rf = 16;
  c.baseline_train.epochs = 500;
  c.baseline_train.lr = 1e-3;
  c.baseline_train.max_train_pairs = 8;
  c.fignn_train.epochs = 100;
  c.fignn_train.lr = 5e-4;
  c.fignn_train.max_train_pairs = 8;
  if (name == "speedy-toy") {
    c.model.n_features = 4;
  } else if (name == "bfs-toy") {
    c.model.n_features = 2;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected speedy-toy or bfs-toy)");
  }
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["dataset"] = {{"preset", c.dataset.preset},
                  {"seed", c.dataset.seed},
                  {"steps", c.dataset.steps},
                  {"train_fraction", c.dataset.train_fraction},
                  {"width", c.dataset.width},
                  {"height", c.dataset.height},
                  {"nx", c.dataset.nx},
                  {"ny", c.dataset.ny},
                  {"jitter", c.dataset.jitter}};
  j["graph"] = {{"k", c.graph.k}, {"period_x", c.graph.period_x}};
  j["model"] = io::to_json(c.model);
  j["baseline_train"] = io::to_json(c.baseline_train);
  j["fignn_train"] = io::to_json(c.fignn_train);
  j["loss"] = {{"lambda", c.loss.lambda}, {"eps", c.loss.eps}};
  j["fignn_seed"] = c.fignn_seed;
  j["evaluation"] = {{"rollout_steps", c.rollout_steps},
                     {"max_test_pairs", c.max_test_pairs},
                     {"mask_mode", eval::mask_mode_name(c.mask_mode)}};
  j["sweep"] = {{"lambdas", c.lambdas}, {"rfs", c.rfs}, {"seeds", c.seeds}};
  return j;
}

RunConfig from_json(const json& j, RunConfig c) {
  try {
    check_keys(j, "config",
               {"dataset", "graph", "model", "baseline_train", "fignn_train", "loss", "fignn_seed", "evaluation", "sweep"});
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, "dataset", {"preset", "seed", "steps", "train_fraction", "width", "height", "nx", "ny", "jitter"});
      take(d, "preset", c.dataset.preset);
      take(d, "seed", c.dataset.seed);
      take(d, "steps", c.dataset.steps);
      take(d, "train_fraction", c.dataset.train_fraction);
      take(d, "width", c.dataset.width);
      take(d, "height", c.dataset.height);
      take(d, "nx", c.dataset.nx);
      take(d, "ny", c.dataset.ny);
      take(d, "jitter", c.dataset.jitter);
    }
    if (j.contains("graph")) {
      const auto& g = j.at("graph");
      check_keys(g, "graph", {"k", "period_x"});
      take(g, "k", c.graph.k);
      take(g, "period_x", c.graph.period_x);
    }
    if (j.contains("model")) {
      check_keys(j.at("model"), "model",
                 {"n_features", "hidden", "mp_layers_per_cycle", "mlp_depth", "levels", "rf", "l_down", "l_up",
                  "score_mode", "coarsen_factor", "init_seed", "zero_final_decoder", "zero_final_branch"});
      c.model = io::model_config_from_json(j.at("model"), c.model);
    }
    const std::initializer_list<const char*> train_keys = {
        "epochs", "lr", "max_train_pairs", "max_val_pairs", "val_fraction", "eval_every", "divergence_threshold",
        "log_wall_time"};
    if (j.contains("baseline_train")) {
      check_keys(j.at("baseline_train"), "baseline_train", train_keys);
      c.baseline_train = io::train_config_from_json(j.at("baseline_train"), c.baseline_train);
    }
    if (j.contains("fignn_train")) {
      check_keys(j.at("fignn_train"), "fignn_train", train_keys);
      c.fignn_train = io::train_config_from_json(j.at("fignn_train"), c.fignn_train);
    }
    if (j.contains("loss")) {
      check_keys(j.at("loss"), "loss", {"lambda", "eps"});
      take(j.at("loss"), "lambda", c.loss.lambda);
      take(j.at("loss"), "eps", c.loss.eps);
    }
    take(j, "fignn_seed", c.fignn_seed);
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      check_keys(e, "evaluation", {"rollout_steps", "max_test_pairs", "mask_mode"});
      take(e, "rollout_steps", c.rollout_steps);
      take(e, "max_test_pairs", c.max_test_pairs);
      if (e.contains("mask_mode")) c.mask_mode = eval::parse_mask_mode(e.at("mask_mode").get<std::string>());
    }
    if (j.contains("sweep")) {
      const auto& s = j.at("sweep");
      check_keys(s, "sweep", {"lambdas", "rfs", "seeds"});
      take(s, "lambdas", c.lambdas);
      take(s, "rfs", c.rfs);
      take(s, "seeds", c.seeds);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

io::Dataset make_dataset(const RunConfig& c) {
  c.validate();
  const auto& d = c.dataset;
  io::Dataset ds;
  ds.seed = d.seed;
  data::Trajectory raw;
  if (d.preset == "speedy-toy") {
    data::AdvectionConfig ac;
    ac.width = d.width;
    ac.height = d.height;
    ac.n_features = c.model.n_features;
    ac.steps = d.steps;
    const auto resolved = data::resolve_advection(ac, d.seed);
    raw = data::gen_advection_diffusion(resolved, d.seed);
    ds.coords = data::grid_coords(d.width, d.height, resolved.dx);
    json vel = json::array();
    for (const auto& [vx, vy] : resolved.velocity) vel.push_back({vx, vy});
    ds.generator = {{"kind", "advection-diffusion"},
                    {"width", d.width},
                    {"height", d.height},
                    {"steps", d.steps},
                    {"dt", resolved.dt},
                    {"dx", resolved.dx},
                    {"velocity", vel},
                    {"diffusivity", resolved.diffusivity},
                    {"coupling", resolved.coupling},
                    {"modes", resolved.modes}};
  } else {
    if (c.model.n_features != 2) throw ConfigError("bfs-toy carries exactly 2 features (u_x, u_y)");
    const auto mesh = data::jittered_mesh(d.nx, d.ny, d.jitter, d.seed);
    data::VortexConfig vc;
    vc.steps = d.steps;
    vc.domain_x = static_cast<double>(d.nx);
    const auto resolved = data::resolve_vortices(vc, d.seed);
    raw = data::gen_vortex_field(mesh.centroids, resolved, d.seed);
    ds.coords = mesh.centroids;
    ds.faces = mesh.faces;
    json vs = json::array();
    for (const auto& v : *resolved.vortices) {
      vs.push_back({{"x0", v.x0}, {"y0", v.y0}, {"amplitude", v.amplitude}, {"radius", v.radius}});
    }
    ds.generator = {{"kind", "gaussian-vortices"},
                    {"nx", d.nx},
                    {"ny", d.ny},
                    {"jitter", d.jitter},
                    {"steps", d.steps},
                    {"dt", resolved.dt},
                    {"stream_u", resolved.stream_u},
                    {"domain_x", resolved.domain_x},
                    {"vortices", vs}};
  }
  ds.split = data::make_split(raw, d.train_fraction, d.seed);
  ds.trajectory = data::normalize(raw, ds.split);
  return ds;
}

graph::Graph make_graph(const io::Dataset& ds, const RunConfig& c) {
  if (!ds.faces.empty()) return graph::build_mesh_graph(ds.coords, ds.faces);
  return graph::build_knn_graph(ds.coords, c.graph.k, c.graph.period_x);
}

model::GraphContext make_context(const io::Dataset& ds, const RunConfig& c) {
  return model::GraphContext::build(make_graph(ds, c), c.model.levels, c.model.coarsen_factor);
}

eval::SweepConfig sweep_config(const RunConfig& c, const std::string& dataset_name,
                               const std::filesystem::path& out_root) {
  eval::SweepConfig s;
  s.dataset = dataset_name;
  s.lambdas = c.lambdas;
  s.rfs = c.rfs;
  s.seeds = c.seeds;
  s.train = c.fignn_train;
  s.eps = c.loss.eps;
  s.rollout_steps = c.rollout_steps;
  s.max_test_pairs = c.max_test_pairs;
  s.mask_mode = c.mask_mode;
  s.out_root = out_root;
  return s;
}

}  // namespace fignn::exp
