#pragma once

// Minimal tape-based reverse-mode automatic differentiation over dense
// row-major float64 tensors.
//
// Ops record themselves on the tape that is active on the calling thread
// (see TapeScope) whenever at least one input requires a gradient. Without an
// active tape every op is a plain forward evaluation.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fignn::ad {

using Shape = std::vector<std::size_t>;
using Index = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
};

/// Shared handle to a tensor. Copies alias the same storage, like a
/// reference-counted array; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  /// 2-D helper: nested rows, all rows the same length.
  static Tensor matrix(const std::vector<std::vector<double>>& rows, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor wrap(std::shared_ptr<TensorImpl> impl) { return Tensor(std::move(impl)); }

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  /// Rows/cols of a rank-2 tensor; rank-1 tensors read as a column.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Gradient buffer; zeros of the tensor's size when never accumulated.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  Tensor clone() const;   // deep copy, same requires_grad, no grad
  Tensor detach() const;  // deep copy without gradient tracking

  TensorImpl* impl() const noexcept { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& handle() const noexcept { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// Ordered record of executed ops. backward() replays the record in reverse
/// and consumes it.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }
  std::size_t size() const noexcept { return ops_.size(); }
  void clear() { ops_.clear(); }
  void backward(const Tensor& loss);

 private:
  std::vector<std::function<void()>> ops_;
};

/// Makes `tape` the active tape of this thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape() noexcept;

/// Runs backward on the active tape. Throws ContractError without one.
void backward(const Tensor& loss);

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor silu(const Tensor& x);
/// x for x >= 0, x / (1 - x) below: ELU-shaped (slope 1 at 0, saturates at
/// -1) without a transcendental call.
Tensor rational_elu(const Tensor& x);
Tensor reciprocal(const Tensor& x);
Tensor square(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);

/// x[N,d] + b[1,d] broadcast over rows; the only broadcasting op.
Tensor add_row_bias(const Tensor& x, const Tensor& b);
/// x[N,d] * s[N,1], row i scaled by s[i].
Tensor scale_rows(const Tensor& x, const Tensor& s);
/// w / ||w||_2 over all entries.
Tensor l2_normalize(const Tensor& w);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor gather_rows(const Tensor& x, const Index& idx);
Tensor scatter_rows_zero(const Tensor& x, const Index& idx, std::size_t n);
Tensor segment_mean(const Tensor& messages, const Index& target, std::size_t n);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor column(const Tensor& x, std::size_t j);

// ---- composites -----------------------------------------------------------

inline Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

}  // namespace fignn::ad
