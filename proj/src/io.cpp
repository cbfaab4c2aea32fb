#include "fignn/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fignn/error.hpp"

namespace fignn::io {

namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return __builtin_bswap64(v);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

void write_f64(const fs::path& p, const std::vector<double>& values) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + p.string());
  std::vector<std::uint64_t> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) buf[i] = to_le(std::bit_cast<std::uint64_t>(values[i]));
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 8));
  if (!os) throw IoError("failed writing " + p.string());
}

std::vector<double> read_f64(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read " + p.string());
  is.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(is.tellg());
  if (bytes % 8 != 0) throw IoError(p.string() + ": size is not a multiple of 8 bytes");
  is.seekg(0);
  std::vector<std::uint64_t> buf(bytes / 8);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (!is) throw IoError("failed reading " + p.string());
  std::vector<double> out(buf.size());
  for (std::size_t i = 0; i < buf.size(); ++i) out[i] = std::bit_cast<double>(to_le(buf[i]));
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + p.string());
  os << text;
  if (!os) throw IoError("failed writing " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::exception& e) {
    throw IoError(p.string() + ": invalid JSON (" + e.what() + ")");
  }
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// ---- trajectories ----------------------------------------------------------

void save_dataset(const fs::path& dir, const Dataset& ds) {
  const auto& t = ds.trajectory;
  t.validate();
  fs::create_directories(dir);
  json meta;
  meta["shape"] = {t.steps, t.nodes, t.features};
  meta["feature_names"] = t.feature_names;
  meta["dt"] = t.dt;
  if (t.normalization) {
    json stats = json::array();
    for (const auto& s : *t.normalization) stats.push_back({{"mean", s.mean}, {"std", s.std}});
    meta["normalization"] = stats;
  } else {
    meta["normalization"] = nullptr;
  }
  meta["seed"] = ds.seed;
  meta["generator"] = ds.generator;
  meta["split"] = {{"train_begin", ds.split.train_begin},
                   {"train_end", ds.split.train_end},
                   {"test_begin", ds.split.test_begin},
                   {"test_end", ds.split.test_end}};
  meta["faces"] = ds.faces;
  write_json(dir / "meta.json", meta);
  write_f64(dir / "features.bin", t.values);
  std::vector<double> xy;
  for (const auto& p : ds.coords) xy.insert(xy.end(), {p[0], p[1]});
  write_f64(dir / "coords.bin", xy);
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "meta.json")) throw IoError("no dataset at " + dir.string() + " (meta.json missing)");
  const json meta = read_json(dir / "meta.json");
  Dataset ds;
  try {
    auto& t = ds.trajectory;
    const auto shape = meta.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 3) throw IoError("meta.json: shape must be [T, N, F]");
    t.steps = shape[0];
    t.nodes = shape[1];
    t.features = shape[2];
    t.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
    t.dt = meta.at("dt").get<double>();
    if (!meta.at("normalization").is_null()) {
      std::vector<data::ChannelStats> stats;
      for (const auto& s : meta.at("normalization")) stats.push_back({s.at("mean").get<double>(), s.at("std").get<double>()});
      t.normalization = stats;
    }
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.generator = meta.value("generator", json::object());
    const auto& sp = meta.at("split");
    ds.split = {sp.at("train_begin").get<std::size_t>(), sp.at("train_end").get<std::size_t>(),
                sp.at("test_begin").get<std::size_t>(), sp.at("test_end").get<std::size_t>(), ds.seed};
    ds.faces = meta.value("faces", std::vector<std::pair<std::size_t, std::size_t>>{});
  } catch (const json::exception& e) {
    throw IoError((dir / "meta.json").string() + ": " + e.what());
  }
  ds.trajectory.values = read_f64(dir / "features.bin");
  const auto xy = read_f64(dir / "coords.bin");
  if (xy.size() != 2 * ds.trajectory.nodes) throw IoError("coords.bin does not match the node count");
  for (std::size_t i = 0; i < ds.trajectory.nodes; ++i) ds.coords.push_back({xy[2 * i], xy[2 * i + 1]});
  ds.trajectory.validate();
  return ds;
}

// ---- graphs ----------------------------------------------------------------

json graph_to_json(const graph::Graph& g, const graph::Hierarchy* hierarchy) {
  json j;
  json coords = json::array();
  for (const auto& p : g.coords()) coords.push_back({p[0], p[1]});
  j["coords"] = coords;
  json edges = json::array();
  for (std::size_t e = 0; e < g.num_edges(); ++e) edges.push_back({g.src()[e], g.dst()[e]});
  j["edges"] = edges;
  j["period_x"] = g.period_x();
  j["char_length"] = g.char_length();
  json levels = json::array();
  if (hierarchy) {
    for (std::size_t l = 0; l < hierarchy->levels.size(); ++l) {
      const auto& lv = hierarchy->levels[l];
      json c = json::array();
      for (const auto& p : lv.graph.coords()) c.push_back({p[0], p[1]});
      json ce = json::array();
      for (std::size_t e = 0; e < lv.graph.num_edges(); ++e) ce.push_back({lv.graph.src()[e], lv.graph.dst()[e]});
      levels.push_back({{"name", "level" + std::to_string(l + 1)},
                        {"parent_of", lv.parent_of},
                        {"fine_parent", hierarchy->fine_parent[l]},
                        {"coords", c},
                        {"edges", ce},
                        {"char_length", lv.char_length},
                        {"cell_size", lv.cell_size}});
    }
  }
  j["levels"] = levels;
  return j;
}

graph::Graph graph_from_json(const json& j) {
  try {
    std::vector<graph::Point> coords;
    for (const auto& p : j.at("coords")) coords.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : j.at("edges")) edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    return graph::Graph(std::move(coords), std::move(edges), j.value("period_x", 0.0));
  } catch (const json::exception& e) {
    throw IoError(std::string("graph.json: ") + e.what());
  }
}

void save_graph(const fs::path& file, const graph::Graph& g, const graph::Hierarchy* hierarchy) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  write_json(file, graph_to_json(g, hierarchy));
}

graph::Graph load_graph(const fs::path& file) { return graph_from_json(read_json(file)); }

// ---- configs ---------------------------------------------------------------

const char* score_mode_name(model::ScoreMode m) { return m == model::ScoreMode::Dot ? "dot" : "normalized"; }

model::ScoreMode parse_score_mode(const std::string& s) {
  if (s == "dot") return model::ScoreMode::Dot;
  if (s == "normalized") return model::ScoreMode::Normalized;
  throw ConfigError("unknown score mode '" + s + "' (expected dot or normalized)");
}

json to_json(const model::ModelConfig& c) {
  return {{"n_features", c.n_features},
          {"hidden", c.hidden},
          {"mp_layers_per_cycle", c.mp_layers_per_cycle},
          {"mlp_depth", c.mlp_depth},
          {"levels", c.levels},
          {"rf", c.rf},
          {"l_down", c.l_down},
          {"l_up", c.l_up},
          {"score_mode", score_mode_name(c.score_mode)},
          {"coarsen_factor", c.coarsen_factor},
          {"init_seed", c.init_seed},
          {"zero_final_decoder", c.zero_final_decoder},
          {"zero_final_branch", c.zero_final_branch}};
}

namespace {

// Keys of `j` must all appear in `known`.
void reject_unknown(const json& j, const json& known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
  }
}

}  // namespace

model::ModelConfig model_config_from_json(const json& j, model::ModelConfig c) {
  reject_unknown(j, to_json(c), "model config");
  try {
    c.n_features = get_or(j, "n_features", c.n_features);
    c.hidden = get_or(j, "hidden", c.hidden);
    c.mp_layers_per_cycle = get_or(j, "mp_layers_per_cycle", c.mp_layers_per_cycle);
    c.mlp_depth = get_or(j, "mlp_depth", c.mlp_depth);
    c.levels = get_or(j, "levels", c.levels);
    c.rf = get_or(j, "rf", c.rf);
    c.l_down = get_or(j, "l_down", c.l_down);
    c.l_up = get_or(j, "l_up", c.l_up);
    if (j.contains("score_mode")) c.score_mode = parse_score_mode(j.at("score_mode").get<std::string>());
    c.coarsen_factor = get_or(j, "coarsen_factor", c.coarsen_factor);
    c.init_seed = get_or(j, "init_seed", c.init_seed);
    c.zero_final_decoder = get_or(j, "zero_final_decoder", c.zero_final_decoder);
    c.zero_final_branch = get_or(j, "zero_final_branch", c.zero_final_branch);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

json to_json(const train::TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"lr", c.lr},
          {"max_train_pairs", c.max_train_pairs},
          {"max_val_pairs", c.max_val_pairs},
          {"val_fraction", c.val_fraction},
          {"eval_every", c.eval_every},
          {"divergence_threshold", c.divergence_threshold},
          {"log_wall_time", c.log_wall_time}};
}

train::TrainConfig train_config_from_json(const json& j, train::TrainConfig c) {
  reject_unknown(j, to_json(c), "train config");
  try {
    c.epochs = get_or(j, "epochs", c.epochs);
    c.lr = get_or(j, "lr", c.lr);
    c.max_train_pairs = get_or(j, "max_train_pairs", c.max_train_pairs);
    c.max_val_pairs = get_or(j, "max_val_pairs", c.max_val_pairs);
    c.val_fraction = get_or(j, "val_fraction", c.val_fraction);
    c.eval_every = get_or(j, "eval_every", c.eval_every);
    c.divergence_threshold = get_or(j, "divergence_threshold", c.divergence_threshold);
    c.log_wall_time = get_or(j, "log_wall_time", c.log_wall_time);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

// ---- checkpoints -----------------------------------------------------------

void save_checkpoint(const fs::path& dir, model::FignnModel& m, train::Phase phase, const json& extra) {
  fs::create_directories(dir);
  json tensors = json::array();
  std::vector<double> weights;
  for (const auto& p : m.parameters()) {
    tensors.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", weights.size()}});
    const auto d = p.tensor.data();
    weights.insert(weights.end(), d.begin(), d.end());
  }
  json manifest;
  manifest["phase"] = train::phase_name(phase);
  manifest["config"] = to_json(m.config());
  manifest["tensors"] = tensors;
  manifest["total_values"] = weights.size();
  manifest["extra"] = extra;
  write_f64(dir / "weights.bin", weights);
  write_json(dir / "manifest.json", manifest);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json")) {
    throw IoError("no checkpoint at " + dir.string() + " (missing " + (dir / "manifest.json").string() + ")");
  }
  const json manifest = read_json(dir / "manifest.json");
  const auto weights = read_f64(dir / "weights.bin");
  Checkpoint ck;
  const std::string phase = manifest.value("phase", "");
  if (phase == "baseline") ck.phase = train::Phase::Baseline;
  else if (phase == "fignn") ck.phase = train::Phase::Fignn;
  else throw IoError("manifest.json: unknown phase tag '" + phase + "'");
  ck.model = model::FignnModel(model_config_from_json(manifest.at("config")));
  ck.extra = manifest.value("extra", json::object());
  auto params = ck.model.parameters();
  const auto& entries = manifest.at("tensors");
  if (entries.size() != params.size()) {
    throw IoError("manifest.json lists " + std::to_string(entries.size()) + " tensors, the config implies " +
                  std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& e = entries[k];
    auto& p = params[k];
    if (e.at("name").get<std::string>() != p.name || e.at("shape").get<ad::Shape>() != p.tensor.shape()) {
      throw IoError("manifest.json: tensor " + std::to_string(k) + " is " + e.at("name").get<std::string>() +
                    ", expected " + p.name + " " + ad::shape_str(p.tensor.shape()));
    }
    const auto off = e.at("offset").get<std::size_t>();
    if (off + p.tensor.size() > weights.size()) throw IoError("weights.bin is shorter than the manifest");
    auto d = p.tensor.mutable_data();
    std::copy(weights.begin() + static_cast<std::ptrdiff_t>(off),
              weights.begin() + static_cast<std::ptrdiff_t>(off + d.size()), d.begin());
  }
  ck.model.freeze_baseline(ck.phase == train::Phase::Fignn);
  return ck;
}

}  // namespace fignn::io
