#include <cmath>
#include <vector>

#include "doctest.h"
#include "fignn/error.hpp"
#include "fignn/synthdata.hpp"

using namespace fignn;
using data::Trajectory;

namespace {

data::AdvectionConfig small_grid(std::size_t nf, std::size_t steps) {
  data::AdvectionConfig c;
  c.width = 8;
  c.height = 6;
  c.n_features = nf;
  c.steps = steps;
  return c;
}

}  // namespace

TEST_CASE("zero and constant fields stay put") {
  auto cfg = small_grid(4, 30);
  cfg.initial.assign(8 * 6 * 4, 0.0);
  const Trajectory z = data::gen_advection_diffusion(cfg, 3);
  for (double v : z.values) CHECK(v == 0.0);

  cfg.initial.assign(8 * 6 * 4, 2.5);
  const Trajectory c = data::gen_advection_diffusion(cfg, 3);
  for (double v : c.values) CHECK(v == doctest::Approx(2.5).epsilon(1e-13));
}

TEST_CASE("pure diffusion conserves the field sum") {
  auto cfg = small_grid(1, 50);
  cfg.velocity = {{0.0, 0.0}};
  cfg.diffusivity = {0.15};
  cfg.coupling = 0.0;
  const Trajectory t = data::gen_advection_diffusion(cfg, 8);
  auto total = [&](std::size_t s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.nodes; ++i) acc += t.at(s, i, 0);
    return acc;
  };
  double varied = 0.0;
  for (std::size_t s = 1; s < t.steps; ++s) {
    CHECK(std::abs(total(s) - total(s - 1)) < 1e-10);
    varied = std::max(varied, std::abs(t.at(s, 0, 0) - t.at(0, 0, 0)));
  }
  CHECK(varied > 1e-3);
}

TEST_CASE("CFL violations are configuration errors") {
  auto cfg = small_grid(1, 5);
  cfg.velocity = {{0.8, 0.0}};
  cfg.diffusivity = {0.01};
  CHECK_THROWS_AS(data::gen_advection_diffusion(cfg, 0), ConfigError);
  cfg.velocity = {{0.1, 0.0}};
  cfg.diffusivity = {0.5};
  CHECK_THROWS_AS(data::gen_advection_diffusion(cfg, 0), ConfigError);
}

TEST_CASE("advection generator is seeded and deterministic") {
  const auto cfg = small_grid(4, 20);
  const Trajectory a = data::gen_advection_diffusion(cfg, 5);
  const Trajectory b = data::gen_advection_diffusion(cfg, 5);
  const Trajectory c = data::gen_advection_diffusion(cfg, 6);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  CHECK(a.feature_names == std::vector<std::string>{"T", "q", "u500", "v500"});
  a.validate();
}

TEST_CASE("free stream without vortices") {
  data::VortexConfig cfg;
  cfg.steps = 5;
  cfg.vortices = std::vector<data::Vortex>{};
  const auto mesh = data::jittered_mesh(5, 4, 0.3, 1);
  const Trajectory t = data::gen_vortex_field(mesh.centroids, cfg, 0);
  for (std::size_t s = 0; s < t.steps; ++s)
    for (std::size_t i = 0; i < t.nodes; ++i) {
      CHECK(t.at(s, i, 0) == 1.0);
      CHECK(t.at(s, i, 1) == 0.0);
    }
  CHECK_THROWS_AS(data::gen_vortex_field({{0, 0}, {1, 1}}, cfg, 0), ConfigError);
}

TEST_CASE("static vortex induces no velocity at its centre") {
  data::VortexConfig cfg;
  cfg.advect = false;
  cfg.stream_u = 0.7;
  cfg.vortices = std::vector<data::Vortex>{{12.0, 9.0, 2.0, 3.0}};
  const auto r = data::resolve_vortices(cfg, 0);
  for (double t : {0.0, 10.0}) {
    const auto [ux, uy] = data::vortex_velocity(r, t, 12.0, 9.0);
    CHECK(ux == doctest::Approx(0.7).epsilon(1e-14));
    CHECK(std::abs(uy) < 1e-14);
  }
}

TEST_CASE("vortex field is divergence free") {
  const auto r = data::resolve_vortices(data::VortexConfig{}, 4);
  REQUIRE(r.vortices->size() >= 3);
  REQUIRE(r.vortices->size() <= 6);
  const double h = 1e-4;
  double worst = 0.0;
  for (int iy = 2; iy < 19; ++iy)
    for (int ix = 1; ix < 40; ++ix) {
      const double x = ix, y = iy, t = 7.0;
      const double dudx = (data::vortex_velocity(r, t, x + h, y).first - data::vortex_velocity(r, t, x - h, y).first) / (2 * h);
      const double dvdy =
          (data::vortex_velocity(r, t, x, y + h).second - data::vortex_velocity(r, t, x, y - h).second) / (2 * h);
      worst = std::max(worst, std::abs(dudx + dvdy));
    }
  CHECK(worst < 1e-6);
}

TEST_CASE("split pairs are disjoint") {
  const Trajectory t = data::gen_advection_diffusion(small_grid(2, 41), 1);
  const auto s = data::make_split(t, 0.9);
  CHECK(s.train_begin == 0);
  CHECK(s.train_end == 36);
  CHECK(s.test_begin == s.train_end);
  CHECK(s.test_end == 40);
}

TEST_CASE("normalize uses train statistics only") {
  Trajectory t;
  t.steps = 5;
  t.nodes = 2;
  t.features = 1;
  t.feature_names = {"a"};
  // Train inputs are snapshots 0..1 (pairs 0,1): values {3,7,3,7} -> mean 5, std 2.
  t.values = {3, 7, 3, 7, 100, -40, 0, 1, 2, 2};
  data::DatasetSplit split{0, 2, 2, 4, 0};
  const Trajectory n = data::normalize(t, split);
  REQUIRE(n.normalization);
  CHECK((*n.normalization)[0].mean == 5.0);
  CHECK((*n.normalization)[0].std == 2.0);
  CHECK(n.values[0] == -1.0);
  CHECK(n.values[1] == 1.0);
  CHECK(n.values[4] == 47.5);

  Trajectory perturbed = t;
  perturbed.values[6] = 1e6;
  perturbed.values[9] = -3.0;
  const Trajectory np = data::normalize(perturbed, split);
  CHECK((*np.normalization)[0].mean == (*n.normalization)[0].mean);
  CHECK((*np.normalization)[0].std == (*n.normalization)[0].std);

  const Trajectory back = data::denormalize(n);
  for (std::size_t i = 0; i < t.values.size(); ++i) CHECK(std::abs(back.values[i] - t.values[i]) < 1e-12);

  Trajectory flat = t;
  flat.values = {1, 1, 1, 1, 5, 5, 5, 5, 5, 5};
  try {
    (void)data::normalize(flat, split);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
}

TEST_CASE("normalized channels have zero mean and unit std on the train split") {
  const Trajectory t = data::gen_advection_diffusion(small_grid(4, 60), 2);
  const auto split = data::make_split(t, 0.9);
  const Trajectory n = data::normalize(t, split);
  for (std::size_t f = 0; f < 4; ++f) {
    double s = 0.0, s2 = 0.0, cnt = 0.0;
    for (std::size_t p = split.train_begin; p < split.train_end; ++p)
      for (std::size_t i = 0; i < n.nodes; ++i) {
        s += n.at(p, i, f);
        cnt += 1.0;
      }
    const double mean = s / cnt;
    for (std::size_t p = split.train_begin; p < split.train_end; ++p)
      for (std::size_t i = 0; i < n.nodes; ++i) s2 += (n.at(p, i, f) - mean) * (n.at(p, i, f) - mean);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(s2 / cnt) - 1.0) < 1e-9);
  }
}
