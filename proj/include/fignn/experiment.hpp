#pragma once

#include <cstdint>
#include <string>

#include "fignn/evaluation.hpp"
#include "fignn/io.hpp"
#include "fignn/model.hpp"
#include "fignn/training.hpp"

namespace fignn::exp {

using json = nlohmann::json;

struct DatasetConfig {
  std::string preset = "speedy-toy";  // speedy-toy | bfs-toy
  std::uint64_t seed = 0;
  std::size_t steps = 400;
  double train_fraction = 0.9;
  std::size_t width = 32;  // speedy-toy grid
  std::size_t height = 16;
  std::size_t nx = 40;  // bfs-toy mesh cells
  std::size_t ny = 20;
  double jitter = 0.3;
};

struct GraphConfig {
  std::size_t k = 10;     // k-NN for point data
  double period_x = 0.0;  // 0 disables periodic-x stitching
};

/// Everything one experiment needs, as a single JSON document.
struct RunConfig {
  DatasetConfig dataset;
  GraphConfig graph;
  model::ModelConfig model;
  train::TrainConfig baseline_train;
  train::TrainConfig fignn_train;
  train::LossConfig loss;
  std::uint64_t fignn_seed = 0;
  std::size_t rollout_steps = 20;
  std::size_t max_test_pairs = 40;
  eval::MaskMode mask_mode = eval::MaskMode::PerStep;
  std::vector<double> lambdas{0.0, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<std::size_t> rfs{4, 8, 16};
  std::vector<std::uint64_t> seeds{0, 1, 2};

  void validate() const;
};

/// Desk-scale defaults for the two toy regimes.
RunConfig preset(const std::string& name);

json to_json(const RunConfig& c);
/// Fields present in `j` override `base`; unknown keys are rejected.
RunConfig from_json(const json& j, RunConfig base);

io::Dataset make_dataset(const RunConfig& c);
graph::Graph make_graph(const io::Dataset& ds, const RunConfig& c);
model::GraphContext make_context(const io::Dataset& ds, const RunConfig& c);

eval::SweepConfig sweep_config(const RunConfig& c, const std::string& dataset_name,
                               const std::filesystem::path& out_root);

}  // namespace fignn::exp
