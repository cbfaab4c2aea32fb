#include <cmath>
#include <vector>

#include "doctest.h"
#include "fignn/error.hpp"
#include "fignn/rng.hpp"
#include "fignn/synthdata.hpp"
#include "fignn/training.hpp"
#include "oracles.hpp"

using namespace fignn;
using ad::Tensor;

namespace {

model::Mask make_mask(std::size_t n, ad::Index keep, std::size_t f = 0) {
  model::Mask m;
  m.feature = f;
  m.binary.assign(n, 0);
  for (std::size_t i : keep) m.binary[i] = 1;
  m.keep = std::move(keep);
  return m;
}

Tensor random_x(std::size_t n, std::size_t f, std::uint64_t seed) {
  CounterRng rng(seed, 31);
  std::vector<double> v(n * f);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from({n, f}, v);
}

struct Toy {
  data::Trajectory traj;
  data::DatasetSplit split;
  model::GraphContext ctx;
};

Toy toy(std::size_t nf = 2) {
  data::AdvectionConfig c;
  c.width = 6;
  c.height = 5;
  c.n_features = nf;
  c.steps = 24;
  Toy t;
  const auto raw = data::gen_advection_diffusion(c, 1);
  t.split = data::make_split(raw, 0.9);
  t.traj = data::normalize(raw, t.split);
  t.ctx = model::GraphContext::build(graph::build_knn_graph(data::grid_coords(6, 5), 4), 2);
  return t;
}

model::ModelConfig toy_model(std::size_t nf = 2) {
  model::ModelConfig m;
  m.n_features = nf;
  m.hidden = 6;
  m.rf = 4;
  m.init_seed = 3;
  return m;
}

train::TrainConfig quick(std::size_t epochs) {
  train::TrainConfig c;
  c.epochs = epochs;
  c.max_train_pairs = 4;
  c.max_val_pairs = 2;
  c.eval_every = 5;
  return c;
}

std::vector<std::vector<double>> snapshot(model::FignnModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

}  // namespace

TEST_CASE("budget") {
  const Tensor p = Tensor::matrix({{1}, {2}, {3}, {4}});
  CHECK(train::budget(p, p, make_mask(4, {0, 2})).item() == 0.0);

  const Tensor t = Tensor::matrix({{0}, {1}, {2}, {3}});
  CHECK(train::budget(p, t, make_mask(4, {0, 1})).item() == 1.0);
  CHECK(oracle::budget_value({1, 2, 3, 4}, {0, 1, 2, 3}, {0, 1}) == 1.0);

  const Tensor q = random_x(7, 1, 1), r = random_x(7, 1, 2);
  CHECK(train::budget(q, r, make_mask(7, {0, 1, 2, 3, 4, 5, 6})).item() == doctest::Approx(ad::mse(q, r).item()));
  CHECK_THROWS_AS(train::budget(q, p, make_mask(7, {0})), DimensionError);
}

TEST_CASE("fignn_loss") {
  const Tensor pred = random_x(6, 2, 3), target = random_x(6, 2, 4);
  const std::vector<model::Mask> masks{make_mask(6, {1, 4}, 0), make_mask(6, {0, 2, 5}, 1)};

  CHECK(train::fignn_loss(pred, target, masks, {0.0, 1e-8}).total.item() == ad::mse(pred, target).item());

  const double same = train::fignn_loss(pred, pred, masks, {0.5, 1e-8}).total.item();
  CHECK(same == doctest::Approx(0.5 * 2 / 1e-8).epsilon(1e-12));

  const auto ref_masks = std::vector<std::vector<std::size_t>>{{1, 4}, {0, 2, 5}};
  for (double lam : {0.0, 1e-4, 1e-2, 1e-1}) {
    const double got = train::fignn_loss(pred, target, masks, {lam, 1e-8}).total.item();
    const double ref = oracle::fignn_loss(oracle::to_mat(pred), oracle::to_mat(target), ref_masks, lam, 1e-8);
    CHECK(got == doctest::Approx(ref).epsilon(1e-13));
  }

  double prev = -1.0;
  for (double lam : {0.0, 1e-4, 1e-3, 1e-2, 1e-1}) {
    const double v = train::fignn_loss(pred, target, masks, {lam, 1e-8}).total.item();
    CHECK(v > prev);
    prev = v;
  }

  CHECK_THROWS_AS(train::fignn_loss(pred, target, {masks[0]}, {0.0, 1e-8}), ContractError);
  CHECK_THROWS_AS(train::LossConfig({-1.0, 1e-8}).validate(), ConfigError);
  CHECK_THROWS_AS(train::LossConfig({0.0, 0.0}).validate(), ConfigError);

  Tensor leaf = random_x(6, 2, 5);
  leaf.set_requires_grad(true);
  const auto r = oracle::check_gradients(
      [&] { return train::fignn_loss(leaf, target, masks, {1e-2, 1e-8}).total; }, {leaf});
  CHECK(r.max_rel < 1e-6);
}

TEST_CASE("adam") {
  auto run = [] {
    Tensor w = Tensor::from({2}, {1.0, -2.0}, true);
    std::vector<model::NamedTensor> ps{{"w", w}};
    train::Adam opt({0.1});
    for (int s = 0; s < 3; ++s) {
      w.zero_grad();
      ad::Tape tape;
      ad::TapeScope scope(tape);
      tape.backward(ad::sum(ad::square(w)));
      opt.step(ps);
    }
    return std::vector<double>(w.data().begin(), w.data().end());
  };
  CHECK(run() == run());

  // First step moves every coordinate by lr against the gradient sign.
  Tensor w = Tensor::from({2}, {1.0, -2.0}, true);
  std::vector<model::NamedTensor> ps{{"w", w}};
  train::Adam opt({0.1});
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    tape.backward(ad::sum(ad::square(w)));
  }
  opt.step(ps);
  CHECK(w.data()[0] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(w.data()[1] == doctest::Approx(-1.9).epsilon(1e-9));
  CHECK(opt.steps() == 1);
}

TEST_CASE("strided pair selection") {
  CHECK(train::strided(0, 10, 4) == std::vector<std::size_t>{0, 2, 5, 7});
  CHECK(train::strided(3, 5, 10) == std::vector<std::size_t>{3, 4});
  const data::DatasetSplit split{0, 20, 20, 22, 0};
  const auto sel = train::select_pairs(split, quick(1));
  for (std::size_t p : sel.train) CHECK(p < 18);
  for (std::size_t p : sel.val) CHECK(p >= 18);
}

TEST_CASE("an already optimal baseline stays put") {
  data::Trajectory t;
  t.steps = 12;
  t.nodes = 30;
  t.features = 2;
  t.feature_names = {"a", "b"};
  t.values.resize(12 * 30 * 2);
  for (std::size_t s = 0; s < 12; ++s)
    for (std::size_t i = 0; i < 30; ++i) {
      t.at(s, i, 0) = std::sin(double(i));
      t.at(s, i, 1) = std::cos(0.3 * double(i));
    }
  const auto split = data::make_split(t, 0.9);
  const auto ctx = model::GraphContext::build(graph::build_knn_graph(data::grid_coords(6, 5), 4), 2);
  auto mc = toy_model();
  mc.zero_final_decoder = true;
  model::FignnModel init(mc);
  const auto res = train::train_baseline(t, split, ctx, mc, quick(5));
  CHECK(res.initial_train_mse == 0.0);
  CHECK(res.final_train_mse == 0.0);
  const auto before = snapshot(init);
  auto trained = res.model;
  const auto after = snapshot(trained);
  for (std::size_t i = 0; i < model::FignnModel(mc).baseline_parameters().size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("baseline training is deterministic and reduces the loss") {
  const Toy d = toy();
  const auto a = train::train_baseline(d.traj, d.split, d.ctx, toy_model(), quick(30));
  const auto b = train::train_baseline(d.traj, d.split, d.ctx, toy_model(), quick(30));
  auto ma = a.model, mb = b.model;
  CHECK(snapshot(ma) == snapshot(mb));
  CHECK(a.final_train_mse < a.initial_train_mse);
  REQUIRE(a.log.size() == 30);
  CHECK(a.log[0].train_mse == a.initial_train_mse);
  CHECK(std::isnan(a.log[0].val_mse));
  CHECK(std::isfinite(a.log[4].val_mse));
  for (const auto& p : ma.baseline_parameters()) CHECK_FALSE(p.tensor.requires_grad());
}

TEST_CASE("phase two leaves the baseline bit-identical") {
  const Toy d = toy();
  const auto base = train::train_baseline(d.traj, d.split, d.ctx, toy_model(), quick(10));
  auto frozen = base.model;
  const auto before = frozen.baseline_parameters();
  std::vector<std::vector<double>> snap;
  for (const auto& p : before) snap.emplace_back(p.tensor.data().begin(), p.tensor.data().end());

  const auto res = train::train_fignn(base.model, d.traj, d.split, d.ctx, {1e-2, 1e-8}, 4, quick(15), 7);
  CHECK_FALSE(res.diverged);
  auto out = res.model;
  const auto after = out.baseline_parameters();
  REQUIRE(after.size() == snap.size());
  for (std::size_t i = 0; i < snap.size(); ++i) {
    CHECK(after[i].name == before[i].name);
    CHECK(std::vector<double>(after[i].tensor.data().begin(), after[i].tensor.data().end()) == snap[i]);
  }
  CHECK(out.config().rf == 4);
  CHECK(res.log.back().budgets.size() == 2);
  CHECK(res.log.back().lambda == 1e-2);

  const auto again = train::train_fignn(base.model, d.traj, d.split, d.ctx, {1e-2, 1e-8}, 4, quick(15), 7);
  auto o2 = again.model;
  CHECK(snapshot(out) == snapshot(o2));
}

TEST_CASE("divergence restores the last good parameters") {
  const Toy d = toy();
  auto cfg = quick(10);
  cfg.divergence_threshold = 1e-12;
  const auto res = train::train_baseline(d.traj, d.split, d.ctx, toy_model(), cfg);
  CHECK(res.diverged);
  CHECK(res.message.find("step 0") != std::string::npos);
  model::FignnModel fresh(toy_model());
  auto got = res.model;
  CHECK(snapshot(got) == snapshot(fresh));
}
