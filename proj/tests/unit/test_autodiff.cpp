#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "fignn/autodiff.hpp"
#include "fignn/error.hpp"
#include "fignn/rng.hpp"
#include "oracles.hpp"

using namespace fignn;
using ad::Tensor;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed, bool grad = true) {
  CounterRng rng(seed, 7);
  std::vector<double> v(r * c);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from({r, c}, v, grad);
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("matmul hand cases") {
  const Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor v = Tensor::matrix({{3}, {4}});
  CHECK(values(ad::matmul(id, v)) == std::vector<double>{3, 4});
  CHECK(ad::matmul(Tensor::matrix({{1, 2}}), v).item() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({4, 5});
  try {
    (void)ad::matmul(a, b);
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
}

TEST_CASE("matmul gradients match finite differences") {
  Tensor a = random_tensor(3, 4, 1);
  Tensor b = random_tensor(4, 2, 2);
  const Tensor w = random_tensor(3, 2, 3, false);
  const auto r = oracle::check_gradients([&] { return ad::sum(ad::mul(ad::matmul(a, b), w)); }, {a, b});
  CHECK(r.checked == 20);
  CHECK(r.max_rel < 1e-6);
}

TEST_CASE("elementwise values and gradients") {
  CHECK(ad::sigmoid(Tensor::scalar(0.0)).item() == 0.5);

  Tensor x = Tensor::scalar(4.0, true);
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    const Tensor y = ad::reciprocal(x);
    CHECK(y.item() == 0.25);
    tape.backward(y);
  }
  CHECK(x.grad()[0] == -0.0625);

  CHECK_THROWS_AS((void)ad::reciprocal(Tensor::scalar(1e-13)), NumericalDomainError);

  Tensor s = random_tensor(1, 8, 4);
  const auto r = oracle::check_gradients([&] { return ad::sum(ad::square(ad::sigmoid(s))); }, {s});
  CHECK(r.max_rel < 1e-6);

  Tensor p = random_tensor(2, 3, 5);
  Tensor q = random_tensor(2, 3, 6);
  const auto r2 = oracle::check_gradients(
      [&] {
        return ad::sum(ad::mul(ad::rational_elu(ad::sub(p, q)), ad::relu(ad::add(p, ad::add_scalar(q, 2.0)))));
      },
      {p, q});
  CHECK(r2.max_rel < 1e-6);
}

TEST_CASE("rational_elu is continuous with unit slope at zero") {
  CHECK(ad::rational_elu(Tensor::scalar(2.0)).item() == 2.0);
  CHECK(ad::rational_elu(Tensor::scalar(-1.0)).item() == -0.5);
  Tensor x = random_tensor(1, 6, 11);
  const auto r = oracle::check_gradients([&] { return ad::sum(ad::rational_elu(x)); }, {x});
  CHECK(r.max_rel < 1e-6);
}

TEST_CASE("gather_rows") {
  const Tensor x = Tensor::matrix({{1}, {2}, {3}});
  CHECK(values(ad::gather_rows(x, {2, 0})) == std::vector<double>{3, 1});
  CHECK(values(ad::gather_rows(x, {0, 1, 2})) == values(x));
  CHECK_THROWS_AS((void)ad::gather_rows(x, {3}), IndexError);
  try {
    (void)ad::gather_rows(x, {0, 5});
  } catch (const IndexError& e) {
    CHECK(std::string(e.what()).find('5') != std::string::npos);
  }

  Tensor g = Tensor::matrix({{1}, {2}, {3}}, true);
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    tape.backward(ad::sum(ad::gather_rows(g, {1, 1})));
  }
  CHECK(g.grad() == std::vector<double>{0, 2, 0});
  g.zero_grad();
  const auto r = oracle::check_gradients([&] { return ad::sum(ad::gather_rows(g, {1, 1})); }, {g});
  CHECK(r.max_abs < 1e-8);
}

TEST_CASE("scatter_rows_zero") {
  CHECK(values(ad::scatter_rows_zero(Tensor::matrix({{7}}), {1}, 3)) == std::vector<double>{0, 7, 0});
  const Tensor x = Tensor::matrix({{1}, {2}, {3}});
  CHECK(values(ad::scatter_rows_zero(x, {2, 0, 1}, 3)) == std::vector<double>{2, 3, 1});
  CHECK_THROWS_AS((void)ad::scatter_rows_zero(x, {0, 0, 1}, 3), ContractError);

  const Tensor r = random_tensor(4, 3, 9, false);
  const ad::Index idx{5, 1, 7, 2};
  const Tensor s = ad::scatter_rows_zero(r, idx, 8);
  CHECK(values(ad::gather_rows(s, idx)) == values(r));
  for (std::size_t i : {0, 3, 4, 6})
    for (std::size_t j = 0; j < 3; ++j) CHECK(s.at(i, j) == 0.0);

  Tensor leaf = random_tensor(4, 3, 10);
  const auto fd = oracle::check_gradients(
      [&] { return ad::sum(ad::square(ad::scatter_rows_zero(leaf, idx, 8))); }, {leaf});
  CHECK(fd.max_rel < 1e-6);
}

TEST_CASE("segment_mean") {
  const Tensor m = Tensor::matrix({{2}, {4}});
  CHECK(values(ad::segment_mean(m, {0, 0}, 2)) == std::vector<double>{3, 0});
  CHECK(values(ad::segment_mean(Tensor::matrix({{5}, {6}, {7}}), {2, 0, 1}, 3)) == std::vector<double>{6, 7, 5});

  Tensor msg = random_tensor(6, 2, 12);
  const Tensor w = random_tensor(4, 2, 13, false);
  const ad::Index tgt{0, 1, 1, 3, 3, 3};
  const auto r =
      oracle::check_gradients([&] { return ad::sum(ad::mul(ad::segment_mean(msg, tgt, 4), w)); }, {msg});
  CHECK(r.max_rel < 1e-6);
}

TEST_CASE("row-wise ops and reductions") {
  Tensor x = random_tensor(3, 4, 20);
  Tensor b = random_tensor(1, 4, 21);
  Tensor s = random_tensor(3, 1, 22);
  Tensor w = random_tensor(4, 1, 23);
  const auto r = oracle::check_gradients(
      [&] {
        const Tensor y = ad::scale_rows(ad::add_row_bias(x, b), s);
        const Tensor z = ad::concat_cols({ad::column(y, 1), ad::matmul(y, ad::l2_normalize(w))});
        return ad::add(ad::mean(ad::square(z)), ad::scale(ad::sum(ad::silu(y)), 0.3));
      },
      {x, b, s, w});
  CHECK(r.max_rel < 1e-6);
}

TEST_CASE("backward contracts") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    ad::backward(ad::sum(x));
  }
  CHECK(x.grad() == std::vector<double>{1, 1, 1});

  x.zero_grad();
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    ad::backward(ad::mse(x, x));
  }
  CHECK(x.grad() == std::vector<double>{0, 0, 0});

  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    CHECK_THROWS_AS(tape.backward(ad::scale(x, 2.0)), ContractError);
  }
  CHECK(ad::active_tape() == nullptr);
  CHECK_THROWS_AS(ad::backward(ad::sum(x)), ContractError);
}

TEST_CASE("duplicated consumer doubles the gradient exactly") {
  Tensor x = random_tensor(2, 3, 30);
  const Tensor w = random_tensor(2, 3, 31, false);
  std::vector<double> once, twice;
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    tape.backward(ad::sum(ad::mul(ad::sigmoid(x), w)));
    once = x.grad();
  }
  x.zero_grad();
  {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    const Tensor y = ad::mul(ad::sigmoid(x), w);
    tape.backward(ad::add(ad::sum(y), ad::sum(y)));
    twice = x.grad();
  }
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == 2.0 * once[i]);
}

TEST_CASE("identical runs are bit-identical") {
  auto run = [] {
    Tensor a = random_tensor(5, 4, 40);
    Tensor b = random_tensor(4, 3, 41);
    ad::Tape tape;
    ad::TapeScope scope(tape);
    const Tensor l = ad::mean(ad::square(ad::rational_elu(ad::matmul(a, b))));
    tape.backward(l);
    std::vector<double> out = a.grad();
    const auto gb = b.grad();
    out.insert(out.end(), gb.begin(), gb.end());
    out.push_back(l.item());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("no tape means no recording and no gradients") {
  Tensor x = random_tensor(2, 2, 50);
  const Tensor y = ad::sum(ad::square(x));
  CHECK(std::isfinite(y.item()));
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("overflow raises a numerical-domain error") {
  const double big = std::numeric_limits<double>::max();
  CHECK_THROWS_AS((void)ad::mul(Tensor::scalar(big), Tensor::scalar(big)), NumericalDomainError);
}
