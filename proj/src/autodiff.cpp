#include "vaca/autodiff.hpp"

#include <cmath>

namespace vaca::ad {

namespace {

thread_local Tape* active_tape = nullptr;

std::string shape_of(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

// x - x is 0 for finite x and NaN otherwise; four lanes keep the loop vectorizable
void check_finite(const Matrix& m, const char* op) {
  const double* p = m.data();
  const Eigen::Index n = m.size();
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  Eigen::Index k = 0;
  for (; k + 4 <= n; k += 4) {
    a0 += p[k] - p[k];
    a1 += p[k + 1] - p[k + 1];
    a2 += p[k + 2] - p[k + 2];
    a3 += p[k + 3] - p[k + 3];
  }
  for (; k < n; ++k) a0 += p[k] - p[k];
  if (!(a0 + a1 + a2 + a3 == 0.0)) throw NumericError(std::string("non-finite value produced by ") + op);
}

// Wraps a forward value; attaches the backward rule only when recording.
Tensor result(Matrix value, const char* op, std::initializer_list<const Tensor*> inputs,
              std::function<void(Node&)> backward) {
  check_finite(value, op);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (active_tape) {
    bool any = false;
    for (const Tensor* t : inputs) any = any || t->requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const Tensor* t : inputs) node->inputs.push_back(t->node());
      node->backward = std::move(backward);
      active_tape->record(node);
    }
  }
  return Tensor(std::move(node));
}

Tensor result_vec(Matrix value, const char* op, const std::vector<Tensor>& inputs,
                  std::function<void(Node&)> backward) {
  check_finite(value, op);
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (active_tape) {
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const auto& t : inputs) node->inputs.push_back(t.node());
      node->backward = std::move(backward);
      active_tape->record(node);
    }
  }
  return Tensor(std::move(node));
}

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_of(a.value()) + " and " + shape_of(b.value()) +
                     " differ");
  }
}

// Elementwise op y = f(x) with dy/dx computed from (x, y).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, const char* op, Fwd fwd, Deriv deriv) {
  Matrix y = fwd(a.value());
  return result(std::move(y), op, {&a}, [deriv](Node& self) {
    auto& in = *self.inputs[0];
    if (in.requires_grad) in.add_grad(self.grad.cwiseProduct(deriv(in.value, self.value)));
  });
}

}  // namespace

void Node::add_grad(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Tensor::Tensor(Matrix value) : node_(std::make_shared<Node>()) { node_->value = std::move(value); }

Matrix Tensor::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("item() needs a 1x1 tensor, got " + shape_of(value()));
  return value()(0, 0);
}

Parameter::Parameter(Matrix init) : node_(std::make_shared<Node>()) {
  node_->value = std::move(init);
  node_->requires_grad = true;
  first_moment = Matrix::Zero(node_->value.rows(), node_->value.cols());
  second_moment = Matrix::Zero(node_->value.rows(), node_->value.cols());
}

const Matrix& Parameter::grad() {
  if (node_->grad.size() == 0) node_->grad = Matrix::Zero(node_->value.rows(), node_->value.cols());
  return node_->grad;
}

void Parameter::zero_grad() { node_->grad.resize(0, 0); }

void Tape::record(const std::shared_ptr<Node>& node) {
  node->tape = this;
  nodes_.push_back(node);
}

void Tape::backward(const Tensor& loss) {
  if (!loss) throw std::invalid_argument("backward on an empty tensor");
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward needs a scalar loss, got " + shape_of(loss.value()));
  if (loss.node()->tape != this) throw std::invalid_argument("backward: loss was not recorded on this tape");
  // intermediate gradients from an earlier pass must not leak into this one
  for (auto& n : nodes_) n->grad.resize(0, 0);
  loss.node()->grad = Matrix::Constant(1, 1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.grad.size() != 0 && n.backward) n.backward(n);
  }
}

RecordScope::RecordScope(Tape& tape) : previous_(active_tape) { active_tape = &tape; }
RecordScope::~RecordScope() { active_tape = previous_; }

bool recording() { return active_tape != nullptr; }

Tensor constant(Matrix value) {
  check_finite(value, "constant");
  return Tensor(std::move(value));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_of(a.value()) + " times " + shape_of(b.value()));
  }
  Matrix y(a.rows(), b.cols());
  y.noalias() = a.value() * b.value();
  return result(std::move(y), "matmul", {&a, &b}, [](Node& self) {
    auto& x = *self.inputs[0];
    auto& w = *self.inputs[1];
    if (x.requires_grad) x.add_grad(self.grad * w.value.transpose());
    if (w.requires_grad) w.add_grad(x.value.transpose() * self.grad);
  });
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "add");
  return result(a.value() + b.value(), "add", {&a, &b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->add_grad(self.grad);
    }
  });
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "sub");
  return result(a.value() - b.value(), "sub", {&a, &b}, [](Node& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->add_grad(self.grad);
    if (self.inputs[1]->requires_grad) self.inputs[1]->add_grad(-self.grad);
  });
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "mul");
  return result(a.value().cwiseProduct(b.value()), "mul", {&a, &b}, [](Node& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) x.add_grad(self.grad.cwiseProduct(y.value));
    if (y.requires_grad) y.add_grad(self.grad.cwiseProduct(x.value));
  });
}

Tensor operator-(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double s) {
  return result(a.value() * s, "scale", {&a}, [s](Node& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->add_grad(self.grad * s);
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  return result((a.value().array() + s).matrix(), "add_scalar", {&a}, [](Node& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->add_grad(self.grad);
  });
}

Tensor add_row(const Tensor& x, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw ShapeError("add_row: " + shape_of(x.value()) + " plus row " + shape_of(b.value()));
  }
  Matrix y = x.value();
  y.rowwise() += b.value().row(0);
  return result(std::move(y), "add_row", {&x, &b}, [](Node& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->add_grad(self.grad);
    if (self.inputs[1]->requires_grad) self.inputs[1]->add_grad(self.grad.colwise().sum());
  });
}

Tensor mul_col(const Tensor& x, const Tensor& c) {
  if (c.cols() != 1 || c.rows() != x.rows()) {
    throw ShapeError("mul_col: " + shape_of(x.value()) + " by column " + shape_of(c.value()));
  }
  Matrix y = x.value().array().colwise() * c.value().col(0).array();
  return result(std::move(y), "mul_col", {&x, &c}, [](Node& self) {
    auto& xi = *self.inputs[0];
    auto& ci = *self.inputs[1];
    if (xi.requires_grad) xi.add_grad(self.grad.array().colwise() * ci.value.col(0).array());
    if (ci.requires_grad) ci.add_grad(self.grad.cwiseProduct(xi.value).rowwise().sum());
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const Eigen::Index n = parts[0].rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != n) throw ShapeError("concat_cols: row counts differ");
    total += p.cols();
  }
  Matrix y(n, total);
  std::vector<Eigen::Index> offsets;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    y.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return result_vec(std::move(y), "concat_cols", parts, [offsets](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto& in = *self.inputs[k];
      if (in.requires_grad) in.add_grad(self.grad.middleCols(offsets[k], in.value.cols()));
    }
  });
}

Tensor slice_cols(const Tensor& a, Eigen::Index offset, Eigen::Index width) {
  if (offset < 0 || width < 0 || offset + width > a.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(offset) + ", +" + std::to_string(width) + ") of " +
                     shape_of(a.value()));
  }
  Matrix y = a.value().middleCols(offset, width);
  return result(std::move(y), "slice_cols", {&a}, [offset, width](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Matrix g = Matrix::Zero(in.value.rows(), in.value.cols());
    g.middleCols(offset, width) = self.grad;
    in.add_grad(g);
  });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](const Matrix& x) -> Matrix { return x.cwiseMax(0.0); },
      [](const Matrix& x, const Matrix&) -> Matrix { return (x.array() > 0.0).cast<double>().matrix(); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, "tanh", [](const Matrix& x) -> Matrix { return x.array().tanh().matrix(); },
      [](const Matrix&, const Matrix& y) -> Matrix { return (1.0 - y.array().square()).matrix(); });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a, "sigmoid", [](const Matrix& x) -> Matrix { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); },
      [](const Matrix&, const Matrix& y) -> Matrix { return (y.array() * (1.0 - y.array())).matrix(); });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, "exp", [](const Matrix& x) -> Matrix { return x.array().exp().matrix(); },
      [](const Matrix&, const Matrix& y) -> Matrix { return y; });
}

Tensor log(const Tensor& a) {
  return unary(
      a, "log", [](const Matrix& x) -> Matrix { return x.array().log().matrix(); },
      [](const Matrix& x, const Matrix&) -> Matrix { return x.array().inverse().matrix(); });
}

Tensor square(const Tensor& a) {
  return unary(
      a, "square", [](const Matrix& x) -> Matrix { return x.array().square().matrix(); },
      [](const Matrix& x, const Matrix&) -> Matrix { return 2.0 * x; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, "softplus",
      [](const Matrix& x) -> Matrix {
        return (x.array().max(0.0) + (-x.array().abs()).exp().log1p()).matrix();
      },
      [](const Matrix& x, const Matrix&) -> Matrix { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); });
}

Tensor log_softmax_rows(const Tensor& a) {
  const Matrix& x = a.value();
  Vector m = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - m;
  Vector lse = shifted.array().exp().rowwise().sum().log().matrix() + m;
  Matrix y = x.colwise() - lse;
  return result(std::move(y), "log_softmax_rows", {&a}, [](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Matrix p = self.value.array().exp();
    Vector gs = self.grad.rowwise().sum();
    Matrix g = self.grad - (p.array().colwise() * gs.array()).matrix();
    in.add_grad(g);
  });
}

Tensor sum(const Tensor& a) {
  return result(Matrix::Constant(1, 1, a.value().sum()), "sum", {&a}, [](Node& self) {
    auto& in = *self.inputs[0];
    if (in.requires_grad) in.add_grad(Matrix::Constant(in.value.rows(), in.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  if (a.value().size() == 0) throw ShapeError("mean of an empty tensor");
  const double n = static_cast<double>(a.value().size());
  return result(Matrix::Constant(1, 1, a.value().sum() / n), "mean", {&a}, [n](Node& self) {
    auto& in = *self.inputs[0];
    if (in.requires_grad) in.add_grad(Matrix::Constant(in.value.rows(), in.value.cols(), self.grad(0, 0) / n));
  });
}

Tensor row_sum(const Tensor& a) {
  Matrix y = a.value().rowwise().sum();
  return result(std::move(y), "row_sum", {&a}, [](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Matrix g = self.grad.col(0).replicate(1, in.value.cols());
    in.add_grad(g);
  });
}

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr < 0.0) throw std::invalid_argument("Adam: negative learning rate");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam: betas must lie in [0, 1)");
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Parameter* p : params_) {
    const Matrix& g = p->grad();
    p->first_moment = beta1_ * p->first_moment + (1.0 - beta1_) * g;
    p->second_moment = beta2_ * p->second_moment + (1.0 - beta2_) * g.cwiseProduct(g);
    p->value().array() -=
        lr_ * (p->first_moment.array() / c1) / ((p->second_moment.array() / c2).sqrt() + eps_);
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace vaca::ad
