#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fignn/autodiff.hpp"
#include "fignn/graph.hpp"

namespace fignn::data {

struct ChannelStats {
  double mean = 0.0;
  double std = 1.0;
};

/// T snapshots of an N x F node-feature matrix, stored t -> node -> feature.
struct Trajectory {
  std::size_t steps = 0;
  std::size_t nodes = 0;
  std::size_t features = 0;
  std::vector<double> values;
  std::vector<std::string> feature_names;
  double dt = 1.0;
  /// Set once normalize() has been applied.
  std::optional<std::vector<ChannelStats>> normalization;

  double& at(std::size_t t, std::size_t i, std::size_t f) { return values[(t * nodes + i) * features + f]; }
  double at(std::size_t t, std::size_t i, std::size_t f) const { return values[(t * nodes + i) * features + f]; }

  /// Snapshot t as an N x F tensor (copy, no gradient).
  ad::Tensor snapshot(std::size_t t) const;
  void validate() const;
};

/// Snapshot pairs (X_t, X_{t+1}); pair p uses snapshots p and p+1.
struct DatasetSplit {
  std::size_t train_begin = 0;
  std::size_t train_end = 0;  // exclusive
  std::size_t test_begin = 0;
  std::size_t test_end = 0;
  std::uint64_t seed = 0;

  std::size_t train_pairs() const { return train_end - train_begin; }
  std::size_t test_pairs() const { return test_end - test_begin; }
};

/// First `train_fraction` of pairs for training, the rest for testing.
DatasetSplit make_split(const Trajectory& t, double train_fraction = 0.9, std::uint64_t seed = 0);

// ---- advection-diffusion (structured-grid analogue) ------------------------

struct AdvectionConfig {
  std::size_t width = 32;
  std::size_t height = 16;
  std::size_t n_features = 4;
  std::size_t steps = 400;
  double dt = 1.0;
  double dx = 1.0;
  /// Per-channel overrides; drawn from the seed when empty.
  std::vector<std::pair<double, double>> velocity;
  std::vector<double> diffusivity;
  double coupling = 0.01;
  std::size_t modes = 4;  // Fourier modes per channel in the initial field
  /// Optional explicit initial field (N x F, node-major); overrides modes.
  std::vector<double> initial;
};

/// Grid nodes in row-major order, node (ix, iy) at (ix*dx, iy*dx).
std::vector<graph::Point> grid_coords(std::size_t width, std::size_t height, double dx = 1.0);

/// Resolves seeded defaults and checks the CFL bounds (ConfigError).
AdvectionConfig resolve_advection(AdvectionConfig cfg, std::uint64_t seed);

Trajectory gen_advection_diffusion(const AdvectionConfig& cfg, std::uint64_t seed);

// ---- Gaussian vortices (unstructured-mesh analogue) ------------------------

struct Vortex {
  double x0 = 0.0;
  double y0 = 0.0;
  double amplitude = 0.0;  // stream-function peak
  double radius = 1.0;
};

struct VortexConfig {
  std::size_t steps = 400;
  double dt = 0.25;
  double stream_u = 1.0;
  double domain_x = 40.0;  // vortex centres advect periodically over [0, domain_x)
  /// Vortices advect with the stream when true, stay put otherwise.
  bool advect = true;
  /// Explicit vortex set; when empty, 3-6 vortices are drawn from the seed.
  std::optional<std::vector<Vortex>> vortices;
};

VortexConfig resolve_vortices(VortexConfig cfg, std::uint64_t seed);

/// Analytic velocity at (x, y) and time index t.
std::pair<double, double> vortex_velocity(const VortexConfig& resolved, double t, double x, double y);

Trajectory gen_vortex_field(const std::vector<graph::Point>& points, const VortexConfig& cfg,
                            std::uint64_t seed);

/// Jittered nx x ny cell centroids plus the face pairs of the logical grid.
struct Mesh {
  std::vector<graph::Point> centroids;
  std::vector<std::pair<std::size_t, std::size_t>> faces;
};
Mesh jittered_mesh(std::size_t nx, std::size_t ny, double jitter, std::uint64_t seed);

// ---- normalisation ---------------------------------------------------------

/// Z-scores each channel with statistics over the input snapshots of the
/// train pairs only. Throws ConfigError for a constant channel.
Trajectory normalize(const Trajectory& t, const DatasetSplit& split);
Trajectory denormalize(const Trajectory& t);

}  // namespace fignn::data
