#pragma once

// Reverse-mode differentiation over dense row-major matrices.
//
// Operations only build a backward graph while a RecordScope is active on the
// calling thread and at least one input requires gradients; otherwise they are
// plain value computations. Every forward result is checked for NaN/Inf.

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "vaca/matrix.hpp"

namespace vaca::ad {

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Node {
  Matrix value;
  Matrix grad;  // empty until something flows back
  bool requires_grad = false;
  const void* tape = nullptr;  // owning tape for recorded nodes
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void add_grad(const Matrix& g);
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Matrix& value() const { return node_->value; }
  /// Gradient accumulated by the last backward pass; zeros if none reached it.
  Matrix grad() const;
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  double item() const;
  const std::shared_ptr<Node>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

/// Trainable leaf with Adam moment buffers.
class Parameter {
 public:
  Parameter() : Parameter(Matrix(0, 0)) {}
  explicit Parameter(Matrix init);

  Tensor tensor() const { return Tensor(node_); }
  Matrix& value() { return node_->value; }
  const Matrix& value() const { return node_->value; }
  /// Accumulated gradient (zeros when nothing has flowed back yet).
  const Matrix& grad();
  void zero_grad();
  Eigen::Index size() const { return node_->value.size(); }

  Matrix first_moment;
  Matrix second_moment;

 private:
  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const std::shared_ptr<Node>& node);
  /// Seeds d(loss)/d(loss) = 1 and runs the recorded backward rules in reverse
  /// order. Parameter gradients accumulate across calls.
  void backward(const Tensor& loss);
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<std::shared_ptr<Node>> nodes_;
};

/// Makes `tape` the recording target of the current thread for its lifetime.
class RecordScope {
 public:
  explicit RecordScope(Tape& tape);
  ~RecordScope();
  RecordScope(const RecordScope&) = delete;
  RecordScope& operator=(const RecordScope&) = delete;

 private:
  Tape* previous_;
};

bool recording();

Tensor constant(Matrix value);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);  // elementwise
Tensor operator-(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
/// x (n×m) + b (1×m) broadcast over rows.
Tensor add_row(const Tensor& x, const Tensor& b);
/// x (n×m) scaled row-wise by c (n×1).
Tensor mul_col(const Tensor& x, const Tensor& c);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, Eigen::Index offset, Eigen::Index width);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
/// log(1 + exp(a)), computed stably.
Tensor softplus(const Tensor& a);
/// Row-wise log-softmax.
Tensor log_softmax_rows(const Tensor& a);

Tensor sum(const Tensor& a);       // 1×1
Tensor mean(const Tensor& a);      // 1×1
Tensor row_sum(const Tensor& a);   // n×1

/// Adam with bias correction. Gradients are left in place; call zero_grad().
class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step();
  void zero_grad();
  long steps() const { return t_; }
  double lr() const { return lr_; }

 private:
  std::vector<Parameter*> params_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace vaca::ad
