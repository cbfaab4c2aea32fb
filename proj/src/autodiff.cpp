#include "fignn/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fignn/error.hpp"

namespace fignn::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

thread_local Tape* g_active_tape = nullptr;

using ImplPtr = std::shared_ptr<TensorImpl>;

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

ImplPtr make_impl(Shape shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return impl;
}

std::span<double> grad_of(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

void check_finite(const TensorImpl& t, const char* op) {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw NumericalDomainError(std::string(op) + ": non-finite value in output of shape " +
                                 shape_str(t.shape));
    }
  }
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

std::size_t rows_of(const Shape& s) { return s.empty() ? 1 : s[0]; }
std::size_t cols_of(const Shape& s) {
  if (s.size() <= 1) return 1;
  return product(Shape(s.begin() + 1, s.end()));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

Tensor finish(ImplPtr out, const char* op) {
  check_finite(*out, op);
  return Tensor::wrap(std::move(out));
}

// Unary elementwise op given value f(x) and derivative df(x, y).
template <typename F, typename DF>
Tensor unary(const Tensor& x, const char* op, F f, DF df) {
  std::vector<double> y(x.size());
  auto xd = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xd[i]);
  auto out = make_impl(x.shape(), std::move(y));
  if (should_record({&x})) {
    out->requires_grad = true;
    g_active_tape->record([xi = x.handle(), o = out, df]() {
      if (o->grad.empty() || !xi->requires_grad) return;
      auto g = grad_of(*xi);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * df(xi->data[i], o->data[i]);
    });
  }
  return finish(std::move(out), op);
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = product(shape);
  auto impl = make_impl(std::move(shape), std::vector<double>(n, value));
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (product(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + shape_str(shape) + " holds " +
                         std::to_string(product(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = make_impl(std::move(shape), std::move(values));
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::matrix(const std::vector<std::vector<double>>& rows, bool requires_grad) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows[0].size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Tensor::matrix: ragged rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return from({r, c}, std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1, 1}, {v}, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }
std::size_t Tensor::rows() const { return rows_of(impl_->shape); }
std::size_t Tensor::cols() const { return cols_of(impl_->shape); }
std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item(): tensor of shape " + shape_str(shape()) + " is not scalar");
  return impl_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }
bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(size(), 0.0);
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() { return grad_of(*impl_); }
void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const {
  auto impl = make_impl(impl_->shape, impl_->data);
  impl->requires_grad = impl_->requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::detach() const { return Tensor(make_impl(impl_->shape, impl_->data)); }

// ---- Tape -----------------------------------------------------------------

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  if (loss.requires_grad()) {
    auto* impl = loss.impl();
    impl->grad.assign(1, 1.0);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }
  ops_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() noexcept { return g_active_tape; }

void backward(const Tensor& loss) {
  if (g_active_tape == nullptr) throw ContractError("backward: no active tape");
  g_active_tape->backward(loss);
}

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<double> y(m * n, 0.0);
  if (m && n && k) {
    MutMap(y.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  }
  auto out = make_impl({m, n}, std::move(y));
  if (should_record({&a, &b})) {
    out->requires_grad = true;
    g_active_tape->record([ai = a.handle(), bi = b.handle(), o = out, m, k, n]() {
      if (o->grad.empty() || m == 0 || n == 0 || k == 0) return;
      ConstMap g(o->grad.data(), m, n);
      if (ai->requires_grad) {
        MutMap(grad_of(*ai).data(), m, k).noalias() += g * ConstMap(bi->data.data(), k, n).transpose();
      }
      if (bi->requires_grad) {
        MutMap(grad_of(*bi).data(), k, n).noalias() += ConstMap(ai->data.data(), m, k).transpose() * g;
      }
    });
  }
  return finish(std::move(out), "matmul");
}

namespace {

template <typename F, typename GA, typename GB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, GA ga, GB gb) {
  require_same_shape(a, b, op);
  std::vector<double> y(a.size());
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(ad[i], bd[i]);
  auto out = make_impl(a.shape(), std::move(y));
  if (should_record({&a, &b})) {
    out->requires_grad = true;
    g_active_tape->record([ai = a.handle(), bi = b.handle(), o = out, ga, gb]() {
      if (o->grad.empty()) return;
      if (ai->requires_grad) {
        auto g = grad_of(*ai);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * ga(ai->data[i], bi->data[i]);
      }
      if (bi->requires_grad) {
        auto g = grad_of(*bi);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * gb(ai->data[i], bi->data[i]);
      }
    });
  }
  return finish(std::move(out), op);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double s) { return s * (1.0 - s); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor silu(const Tensor& x) {
  auto sig = [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
  return unary(
      x, "silu", [sig](double v) { return v * sig(v); },
      [sig](double v, double) {
        const double s = sig(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor rational_elu(const Tensor& x) {
  return unary(
      x, "rational_elu", [](double v) { return v >= 0 ? v : v / (1.0 - v); },
      [](double v, double) {
        if (v >= 0) return 1.0;
        const double d = 1.0 - v;
        return 1.0 / (d * d);
      });
}

Tensor reciprocal(const Tensor& x) {
  for (double v : x.data()) {
    if (std::abs(v) < 1e-12) {
      throw NumericalDomainError("reciprocal: input magnitude below 1e-12 (" + std::to_string(v) + ")");
    }
  }
  return unary(
      x, "reciprocal", [](double v) { return 1.0 / v; }, [](double v, double) { return -1.0 / (v * v); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor scale(const Tensor& x, double c) {
  return unary(
      x, "scale", [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary(
      x, "add_scalar", [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor add_row_bias(const Tensor& x, const Tensor& b) {
  require_matrix(x, "add_row_bias");
  const std::size_t n = x.rows(), d = x.cols();
  if (b.size() != d || b.rows() != 1) {
    throw DimensionError("add_row_bias: bias shape " + shape_str(b.shape()) + " does not fit " +
                         shape_str(x.shape()));
  }
  std::vector<double> y(x.data().begin(), x.data().end());
  auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) y[i * d + j] += bd[j];
  auto out = make_impl(x.shape(), std::move(y));
  if (should_record({&x, &b})) {
    out->requires_grad = true;
    g_active_tape->record([xi = x.handle(), bi = b.handle(), o = out, n, d]() {
      if (o->grad.empty()) return;
      if (xi->requires_grad) {
        auto g = grad_of(*xi);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
      }
      if (bi->requires_grad) {
        auto g = grad_of(*bi);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) g[j] += o->grad[i * d + j];
      }
    });
  }
  return finish(std::move(out), "add_row_bias");
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
  require_matrix(x, "scale_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (s.size() != n) {
    throw DimensionError("scale_rows: scale shape " + shape_str(s.shape()) + " does not fit " +
                         shape_str(x.shape()));
  }
  std::vector<double> y(n * d);
  auto xd = x.data();
  auto sd = s.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) y[i * d + j] = xd[i * d + j] * sd[i];
  auto out = make_impl(x.shape(), std::move(y));
  if (should_record({&x, &s})) {
    out->requires_grad = true;
    g_active_tape->record([xi = x.handle(), si = s.handle(), o = out, n, d]() {
      if (o->grad.empty()) return;
      if (xi->requires_grad) {
        auto g = grad_of(*xi);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < d; ++j) g[i * d + j] += o->grad[i * d + j] * si->data[i];
      }
      if (si->requires_grad) {
        auto g = grad_of(*si);
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < d; ++j) acc += o->grad[i * d + j] * xi->data[i * d + j];
          g[i] += acc;
        }
      }
    });
  }
  return finish(std::move(out), "scale_rows");
}

Tensor l2_normalize(const Tensor& w) {
  double sq = 0.0;
  for (double v : w.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm < 1e-12) throw NumericalDomainError("l2_normalize: vector norm below 1e-12");
  std::vector<double> y(w.data().begin(), w.data().end());
  for (double& v : y) v /= norm;
  auto out = make_impl(w.shape(), std::move(y));
  if (should_record({&w})) {
    out->requires_grad = true;
    g_active_tape->record([wi = w.handle(), o = out, norm]() {
      if (o->grad.empty() || !wi->requires_grad) return;
      // d(w/|w|) = (g - u (u.g)) / |w|
      double ug = 0.0;
      for (std::size_t i = 0; i < o->data.size(); ++i) ug += o->data[i] * o->grad[i];
      auto g = grad_of(*wi);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += (o->grad[i] - o->data[i] * ug) / norm;
    });
  }
  return finish(std::move(out), "l2_normalize");
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto out = make_impl({1, 1}, {acc});
  if (should_record({&x})) {
    out->requires_grad = true;
    g_active_tape->record([xi = x.handle(), o = out]() {
      if (o->grad.empty() || !xi->requires_grad) return;
      auto g = grad_of(*xi);
      for (double& v : g) v += o->grad[0];
    });
  }
  return finish(std::move(out), "sum");
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw DimensionError("mean: empty tensor");
  const double n = static_cast<double>(x.size());
  return unary(
      sum(x), "mean", [n](double v) { return v / n; }, [n](double, double) { return 1.0 / n; });
}

Tensor gather_rows(const Tensor& x, const Index& idx) {
  require_matrix(x, "gather_rows");
  const std::size_t n = x.rows(), d = x.cols(), k = idx.size();
  for (std::size_t j = 0; j < k; ++j) {
    if (idx[j] >= n) {
      throw IndexError("gather_rows: index " + std::to_string(idx[j]) + " at position " +
                       std::to_string(j) + " out of range [0," + std::to_string(n) + ")");
    }
  }
  std::vector<double> y(k * d);
  auto xd = x.data();
  for (std::size_t j = 0; j < k; ++j)
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(idx[j] * d), d, y.begin() + static_cast<std::ptrdiff_t>(j * d));
  auto out = make_impl({k, d}, std::move(y));
  if (should_record({&x})) {
    out->requires_grad = true;
    g_active_tape->record([xi = x.handle(), o = out, idx, d]() {
      if (o->grad.empty() || !xi->requires_grad) return;
      auto g = grad_of(*xi);
      for (std::size_t j = 0; j < idx.size(); ++j)
        for (std::size_t c = 0; c < d; ++c) g[idx[j] * d + c] += o->grad[j * d + c];
    });
  }
  return finish(std::move(out), "gather_rows");
}

Tensor scatter_rows_zero(const Tensor& x, const Index& idx, std::size_t n) {
  require_matrix(x, "scatter_rows_zero");
  const std::size_t k = x.rows(), d = x.cols();
  if (idx.size() != k) {
    throw DimensionError("scatter_rows_zero: " + std::to_string(idx.size()) + " indices for " +
                         std::to_string(k) + " rows");
  }
  std::vector<char> seen(n, 0);
  for (std::size_t j = 0; j < k; ++j) {
    if (idx[j] >= n) {
      throw IndexError("scatter_rows_zero: index " + std::to_string(idx[j]) + " out of range [0," +
                       std::to_string(n) + ")");
    }
    if (seen[idx[j]]) {
      throw ContractError("scatter_rows_zero: duplicate target index " + std::to_string(idx[j]));
    }
    seen[idx[j]] = 1;
  }
  std::vector<double> y(n * d, 0.0);
  auto xd = x.data();
  for (std::size_t j = 0; j < k; ++j)
    std::copy_n(xd.begin() + static_cast<std::ptrdiff_t>(j * d), d, y.begin() + static_cast<std::ptrdiff_t>(idx[j] * d));
  auto out = make_impl({n, d}, std::move(y));
  if (should_record({&x})) {
    out->requires_grad = true;
    g_active_tape->record([xi = x.handle(), o = out, idx, d]() {
      if (o->grad.empty() || !xi->requires_grad) return;
      auto g = grad_of(*xi);
      for (std::size_t j = 0; j < idx.size(); ++j)
        for (std::size_t c = 0; c < d; ++c) g[j * d + c] += o->grad[idx[j] * d + c];
    });
  }
  return finish(std::move(out), "scatter_rows_zero");
}

Tensor segment_mean(const Tensor& messages, const Index& target, std::size_t n) {
  require_matrix(messages, "segment_mean");
  const std::size_t e = messages.rows(), d = messages.cols();
  if (target.size() != e) {
    throw DimensionError("segment_mean: " + std::to_string(target.size()) + " targets for " +
                         std::to_string(e) + " messages");
  }
  std::vector<double> count(n, 0.0);
  for (std::size_t j = 0; j < e; ++j) {
    if (target[j] >= n) {
      throw IndexError("segment_mean: target " + std::to_string(target[j]) + " out of range [0," +
                       std::to_string(n) + ")");
    }
    count[target[j]] += 1.0;
  }
  std::vector<double> y(n * d, 0.0);
  auto md = messages.data();
  for (std::size_t j = 0; j < e; ++j)
    for (std::size_t c = 0; c < d; ++c) y[target[j] * d + c] += md[j * d + c];
  for (std::size_t i = 0; i < n; ++i) {
    if (count[i] > 0)
      for (std::size_t c = 0; c < d; ++c) y[i * d + c] /= count[i];
  }
  auto out = make_impl({n, d}, std::move(y));
  if (should_record({&messages})) {
    out->requires_grad = true;
    g_active_tape->record([mi = messages.handle(), o = out, target, count = std::move(count), d]() {
      if (o->grad.empty() || !mi->requires_grad) return;
      auto g = grad_of(*mi);
      for (std::size_t j = 0; j < target.size(); ++j) {
        const double w = 1.0 / count[target[j]];
        for (std::size_t c = 0; c < d; ++c) g[j * d + c] += o->grad[target[j] * d + c] * w;
      }
    });
  }
  return finish(std::move(out), "segment_mean");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  bool record = false;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != n) {
      throw DimensionError("concat_cols: row count " + std::to_string(p.rows()) + " differs from " +
                           std::to_string(n));
    }
    offsets.push_back(total);
    total += p.cols();
    record = record || should_record({&p});
  }
  std::vector<double> y(n * total);
  for (std::size_t q = 0; q < parts.size(); ++q) {
    const std::size_t w = parts[q].cols();
    auto pd = parts[q].data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < w; ++c) y[i * total + offsets[q] + c] = pd[i * w + c];
  }
  auto out = make_impl({n, total}, std::move(y));
  if (record) {
    out->requires_grad = true;
    std::vector<ImplPtr> handles;
    for (const auto& p : parts) handles.push_back(p.handle());
    g_active_tape->record([hs = std::move(handles), offsets, o = out, n, total]() {
      if (o->grad.empty()) return;
      for (std::size_t q = 0; q < hs.size(); ++q) {
        if (!hs[q]->requires_grad) continue;
        const std::size_t w = cols_of(hs[q]->shape);
        auto g = grad_of(*hs[q]);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < w; ++c) g[i * w + c] += o->grad[i * total + offsets[q] + c];
      }
    });
  }
  return finish(std::move(out), "concat_cols");
}

Tensor column(const Tensor& x, std::size_t j) {
  require_matrix(x, "column");
  const std::size_t n = x.rows(), d = x.cols();
  if (j >= d) {
    throw IndexError("column: index " + std::to_string(j) + " out of range [0," + std::to_string(d) + ")");
  }
  std::vector<double> y(n);
  auto xd = x.data();
  for (std::size_t i = 0; i < n; ++i) y[i] = xd[i * d + j];
  auto out = make_impl({n, 1}, std::move(y));
  if (should_record({&x})) {
    out->requires_grad = true;
    g_active_tape->record([xi = x.handle(), o = out, j, n, d]() {
      if (o->grad.empty() || !xi->requires_grad) return;
      auto g = grad_of(*xi);
      for (std::size_t i = 0; i < n; ++i) g[i * d + j] += o->grad[i];
    });
  }
  return finish(std::move(out), "column");
}

}  // namespace fignn::ad
