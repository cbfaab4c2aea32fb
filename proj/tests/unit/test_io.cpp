#include <cmath>
#include <filesystem>
#include <limits>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "fignn/error.hpp"
#include "fignn/io.hpp"

using namespace fignn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fignn_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<std::vector<double>> weights(model::FignnModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

TEST_CASE("raw doubles round-trip bit-exactly") {
  const fs::path dir = scratch("raw");
  const std::vector<double> v{0.1, -0.0, 1e-310, std::numeric_limits<double>::max(), M_PI, -7.25};
  io::write_f64(dir / "v.bin", v);
  CHECK(fs::file_size(dir / "v.bin") == 8 * v.size());
  const auto back = io::read_f64(dir / "v.bin");
  REQUIRE(back.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::signbit(back[i]) == std::signbit(v[i]));
  CHECK(back == v);
  io::write_text(dir / "odd.bin", "12345");
  CHECK_THROWS_AS(io::read_f64(dir / "odd.bin"), IoError);
  CHECK_THROWS_AS(io::read_f64(dir / "missing.bin"), IoError);
  io::write_text(dir / "bad.json", "{nope");
  CHECK_THROWS_AS(io::read_json(dir / "bad.json"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("dataset round-trip") {
  const fs::path dir = scratch("dataset");
  data::AdvectionConfig c;
  c.width = 6;
  c.height = 4;
  c.n_features = 3;
  c.steps = 9;
  io::Dataset ds;
  const auto raw = data::gen_advection_diffusion(c, 4);
  ds.split = data::make_split(raw, 0.75, 4);
  ds.trajectory = data::normalize(raw, ds.split);
  ds.coords = data::grid_coords(6, 4);
  ds.seed = 4;
  ds.generator = {{"kind", "advection"}, {"width", 6}};
  io::save_dataset(dir, ds);
  const auto back = io::load_dataset(dir);
  CHECK(back.trajectory.values == ds.trajectory.values);
  CHECK(back.trajectory.feature_names == ds.trajectory.feature_names);
  CHECK(back.trajectory.steps == 9);
  REQUIRE(back.trajectory.normalization);
  CHECK((*back.trajectory.normalization)[2].std == (*ds.trajectory.normalization)[2].std);
  CHECK(back.coords == ds.coords);
  CHECK(back.split.train_end == ds.split.train_end);
  CHECK(back.seed == 4);
  CHECK(back.generator == ds.generator);
  CHECK(fs::file_size(dir / "features.bin") == 8 * 9 * 24 * 3);
  const auto meta = io::read_json(dir / "meta.json");
  CHECK(meta["shape"] == std::vector<int>{9, 24, 3});

  CHECK_THROWS_AS(io::load_dataset(dir / "nothing"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("graph json round-trip") {
  const fs::path dir = scratch("graph");
  std::vector<graph::Point> pts;
  for (int i = 0; i < 40; ++i) pts.push_back({0.1 * i * i - 0.37 * i, std::sin(double(i)) / 3.0});
  const graph::Graph g = graph::build_knn_graph(pts, 4);
  const auto h = graph::build_hierarchy(g, 2);
  io::save_graph(dir / "graph.json", g, &h);
  const graph::Graph back = io::load_graph(dir / "graph.json");
  CHECK(back.coords() == g.coords());
  CHECK(back.edges() == g.edges());
  CHECK(back.edge_features() == g.edge_features());
  const auto j = io::read_json(dir / "graph.json");
  CHECK(j["levels"].size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("config round-trips") {
  model::ModelConfig m;
  m.hidden = 24;
  m.rf = 8;
  m.score_mode = model::ScoreMode::Normalized;
  m.init_seed = 77;
  const auto mb = io::model_config_from_json(io::to_json(m));
  CHECK(mb.hidden == 24);
  CHECK(mb.rf == 8);
  CHECK(mb.score_mode == model::ScoreMode::Normalized);
  CHECK(mb.init_seed == 77);
  CHECK(io::to_json(mb) == io::to_json(m));
  CHECK_THROWS_AS(io::parse_score_mode("cosine"), ConfigError);
  CHECK_THROWS_AS(io::model_config_from_json(io::json{{"hiden", 3}}), ConfigError);

  train::TrainConfig t;
  t.epochs = 12;
  t.lr = 3e-4;
  CHECK(io::to_json(io::train_config_from_json(io::to_json(t))) == io::to_json(t));
}

TEST_CASE("checkpoint round-trip and validation") {
  const fs::path dir = scratch("ckpt");
  model::ModelConfig c;
  c.n_features = 2;
  c.hidden = 6;
  c.init_seed = 3;
  model::FignnModel m(c);
  io::save_checkpoint(dir / "a", m, train::Phase::Fignn, {{"note", "x"}});
  auto ck = io::load_checkpoint(dir / "a");
  CHECK(ck.phase == train::Phase::Fignn);
  CHECK(ck.extra["note"] == "x");
  CHECK(weights(ck.model) == weights(m));
  for (const auto& p : ck.model.baseline_parameters()) CHECK_FALSE(p.tensor.requires_grad());

  const auto manifest = io::read_json(dir / "a" / "manifest.json");
  CHECK(manifest["phase"] == "fignn");
  std::size_t total = 0;
  for (const auto& p : m.parameters()) total += p.tensor.size();
  CHECK(manifest["total_values"] == total);
  CHECK(fs::file_size(dir / "a" / "weights.bin") == 8 * total);

  // Saving the same model twice gives identical bytes.
  io::save_checkpoint(dir / "b", m, train::Phase::Fignn, {{"note", "x"}});
  CHECK(io::read_text(dir / "a" / "weights.bin") == io::read_text(dir / "b" / "weights.bin"));
  CHECK(io::read_text(dir / "a" / "manifest.json") == io::read_text(dir / "b" / "manifest.json"));

  auto broken = manifest;
  broken["tensors"][0]["name"] = "encoder.9.weight";
  io::write_json(dir / "b" / "manifest.json", broken);
  CHECK_THROWS_AS(io::load_checkpoint(dir / "b"), IoError);
  broken = manifest;
  broken["phase"] = "warmup";
  io::write_json(dir / "b" / "manifest.json", broken);
  CHECK_THROWS_AS(io::load_checkpoint(dir / "b"), IoError);
  io::write_json(dir / "b" / "manifest.json", manifest);
  io::write_f64(dir / "b" / "weights.bin", {1.0, 2.0});
  CHECK_THROWS_AS(io::load_checkpoint(dir / "b"), IoError);
  CHECK_THROWS_AS(io::load_checkpoint(dir / "none"), IoError);
  fs::remove_all(dir);
}
