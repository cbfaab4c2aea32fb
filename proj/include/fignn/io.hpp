#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fignn/graph.hpp"
#include "fignn/model.hpp"
#include "fignn/synthdata.hpp"
#include "fignn/training.hpp"

namespace fignn::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---- raw little-endian doubles ---------------------------------------------

void write_f64(const fs::path& p, const std::vector<double>& values);
std::vector<double> read_f64(const fs::path& p);

void write_text(const fs::path& p, const std::string& text);
std::string read_text(const fs::path& p);
json read_json(const fs::path& p);
void write_json(const fs::path& p, const json& j);

// ---- trajectories ----------------------------------------------------------

/// A trajectory directory: meta.json, features.bin, coords.json and, for
/// unstructured data, the mesh face list.
struct Dataset {
  data::Trajectory trajectory;
  std::vector<graph::Point> coords;
  std::vector<std::pair<std::size_t, std::size_t>> faces;  // empty for point clouds
  data::DatasetSplit split;
  std::uint64_t seed = 0;
  json generator;  // resolved generator config echo
};

void save_dataset(const fs::path& dir, const Dataset& ds);
Dataset load_dataset(const fs::path& dir);

// ---- graphs ----------------------------------------------------------------

json graph_to_json(const graph::Graph& g, const graph::Hierarchy* hierarchy = nullptr);
graph::Graph graph_from_json(const json& j);
void save_graph(const fs::path& file, const graph::Graph& g, const graph::Hierarchy* hierarchy = nullptr);
graph::Graph load_graph(const fs::path& file);

// ---- model checkpoints -----------------------------------------------------

json to_json(const model::ModelConfig& c);
model::ModelConfig model_config_from_json(const json& j, model::ModelConfig base = {});
const char* score_mode_name(model::ScoreMode m);
model::ScoreMode parse_score_mode(const std::string& s);

json to_json(const train::TrainConfig& c);
train::TrainConfig train_config_from_json(const json& j, train::TrainConfig base = {});

struct Checkpoint {
  model::FignnModel model;
  train::Phase phase = train::Phase::Baseline;
  json extra;  // free-form run metadata echoed in the manifest
};

/// manifest.json (tensor names, shapes and offsets, config echo, phase tag)
/// plus weights.bin in manifest order.
void save_checkpoint(const fs::path& dir, model::FignnModel& m, train::Phase phase, const json& extra = json::object());
Checkpoint load_checkpoint(const fs::path& dir);

}  // namespace fignn::io
