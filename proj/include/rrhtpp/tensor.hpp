#pragma once

// Dense row-major matrices and a small reverse-mode autodiff engine.
//
// Every value is a rank-2 tensor (scalars are 1x1, vectors are 1xN rows). A
// Var wraps a graph node; ops on Vars record themselves on the implicit tape
// formed by node->inputs links whenever gradient tracking is enabled and at
// least one input requires a gradient. backward() walks that tape once in
// reverse topological order and then releases it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rrhtpp/error.hpp"

namespace rrhtpp {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
      throw std::invalid_argument("tensor: value count " + std::to_string(values_.size()) +
                                  " does not match shape " + std::to_string(rows_) + "x" +
                                  std::to_string(cols_));
    }
  }

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row(std::vector<double> v) {
    const auto n = v.size();
    return Tensor(1, n, std::move(v));
  }
  static Tensor column(std::vector<double> v) {
    const auto n = v.size();
    return Tensor(n, 1, std::move(v));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

  Tensor& operator+=(const Tensor& o) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline std::string shape_string(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

namespace ad {

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
inline Eigen::Map<RowMat> map(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}
inline Eigen::Map<const RowMat> map(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

/// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
  const char* op = "leaf";
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;

  void accumulate(const Tensor& g) {
    if (grad.size() == 0) grad = Tensor(value.rows(), value.cols());
    grad += g;
  }
  Tensor& grad_buffer() {
    if (grad.size() == 0) grad = Tensor(value.rows(), value.cols());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  /// Mutable access for optimizers and checkpoint loading; only valid on leaves.
  Tensor& mutable_value() { return node_->value; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  std::vector<std::size_t> shape() const { return node_->value.shape(); }
  double item() const {
    if (node_->value.size() != 1) throw std::invalid_argument("item() on non-scalar " + shape_string(value()));
    return node_->value[0];
  }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }

  /// Gradient accumulated by backward(); zeros if this leaf was never reached.
  Tensor grad() const {
    if (node_->grad.size() == 0) return Tensor(rows(), cols());
    return node_->grad;
  }
  void zero_grad() { node_->grad = Tensor(); }

  /// Same value, cut from the tape.
  Var detach() const { return Var(node_->value, false); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

inline Var parameter(Tensor value) { return Var(std::move(value), true); }
inline Var constant(Tensor value) { return Var(std::move(value), false); }
inline Var scalar(double v) { return Var(Tensor::scalar(v), false); }

namespace detail {

inline void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string("non-finite result in ") + op);
}

template <class Backward>
Var record(Tensor value, std::vector<Var> inputs, const char* op, Backward&& backward) {
  require_finite(value, op);
  const bool track = grad_enabled() && std::any_of(inputs.begin(), inputs.end(),
                                                   [](const Var& v) { return v.requires_grad(); });
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  node->leaf = false;
  if (track) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::forward<Backward>(backward);
  }
  return Var(std::move(node));
}

inline void check_same(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.value()) + " vs " +
                                shape_string(b.value()));
  }
}

// b either matches a or is a single row broadcast over a's rows.
inline bool check_broadcast(const Var& a, const Var& b, const char* op) {
  if (a.value().same_shape(b.value())) return false;
  if (b.rows() == 1 && b.cols() == a.cols()) return true;
  throw std::invalid_argument(std::string(op) + ": cannot broadcast " + shape_string(b.value()) + " onto " +
                              shape_string(a.value()));
}

inline Tensor reduce_rows(const Tensor& g) {
  Tensor out(1, g.cols());
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) out[c] += g(r, c);
  return out;
}

template <class F, class DF>
Var unary(const Var& a, const char* op, F f, DF df) {
  Tensor out(a.rows(), a.cols());
  const auto& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return record(std::move(out), {a}, op, [df](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(in.value[i], self.value[i]);
  });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary ops

inline Var add(const Var& a, const Var& b) {
  const bool bcast = detail::check_broadcast(a, b, "add");
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bcast ? b.value()(0, c) : b.value()(r, c);
  return detail::record(std::move(out), {a, b}, "add", [bcast](Node& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(self.grad);
    if (self.inputs[1]->requires_grad) self.inputs[1]->accumulate(bcast ? detail::reduce_rows(self.grad) : self.grad);
  });
}

inline Var sub(const Var& a, const Var& b) {
  const bool bcast = detail::check_broadcast(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) -= bcast ? b.value()(0, c) : b.value()(r, c);
  return detail::record(std::move(out), {a, b}, "sub", [bcast](Node& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(self.grad);
    if (self.inputs[1]->requires_grad) {
      Tensor g = bcast ? detail::reduce_rows(self.grad) : self.grad;
      for (auto& v : g.values()) v = -v;
      self.inputs[1]->accumulate(g);
    }
  });
}

/// Hadamard product, with optional row broadcast of b.
inline Var mul(const Var& a, const Var& b) {
  const bool bcast = detail::check_broadcast(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= bcast ? b.value()(0, c) : b.value()(r, c);
  return detail::record(std::move(out), {a, b}, "mul", [bcast](Node& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    const std::size_t rows = self.value.rows(), cols = self.value.cols();
    if (A.requires_grad) {
      Tensor& g = A.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g(r, c) += self.grad(r, c) * (bcast ? B.value(0, c) : B.value(r, c));
    }
    if (B.requires_grad) {
      Tensor& g = B.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (bcast ? g(0, c) : g(r, c)) += self.grad(r, c) * A.value(r, c);
    }
  });
}

inline Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  return detail::record(std::move(out), {a}, "scale", [s](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

inline Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v += s;
  return detail::record(std::move(out), {a}, "add_scalar", [](Node& self) {
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(self.grad);
  });
}

/// Multiplies row r of a by factors[r].
inline Var scale_rows(const Var& a, std::vector<double> factors) {
  if (factors.size() != a.rows()) throw std::invalid_argument("scale_rows: factor count does not match rows");
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= factors[r];
  return detail::record(std::move(out), {a}, "scale_rows", [factors = std::move(factors)](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) += factors[r] * self.grad(r, c);
  });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator+(const Var& a, double s) { return add_scalar(a, s); }
inline Var operator+(double s, const Var& a) { return add_scalar(a, s); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_string(a.value()) + " * " +
                                shape_string(b.value()));
  }
  Tensor out(a.rows(), b.cols());
  detail::map(out).noalias() = detail::map(a.value()) * detail::map(b.value());
  return detail::record(std::move(out), {a, b}, "matmul", [](Node& self) {
    auto& A = *self.inputs[0];
    auto& B = *self.inputs[1];
    const auto G = detail::map(std::as_const(self.grad));
    if (A.requires_grad) detail::map(A.grad_buffer()).noalias() += G * detail::map(std::as_const(B.value)).transpose();
    if (B.requires_grad) detail::map(B.grad_buffer()).noalias() += detail::map(std::as_const(A.value)).transpose() * G;
  });
}

inline Var transpose(const Var& a) {
  Tensor out(a.cols(), a.rows());
  detail::map(out) = detail::map(a.value()).transpose();
  return detail::record(std::move(out), {a}, "transpose", [](Node& self) {
    auto& in = *self.inputs[0];
    if (in.requires_grad) detail::map(in.grad_buffer()) += detail::map(std::as_const(self.grad)).transpose();
  });
}

// ---------------------------------------------------------------------------
// Structural ops

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) out(r, offset + c) = p.value()(r, c);
    offset += p.cols();
  }
  return detail::record(std::move(out), parts, "concat_cols", [](Node& self) {
    std::size_t off = 0;
    for (auto& in : self.inputs) {
      if (in->requires_grad) {
        Tensor& g = in->grad_buffer();
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) += self.grad(r, off + c);
      }
      off += in->value.cols();
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column count mismatch");
    rows += p.rows();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(), out.data() + offset * cols);
    offset += p.rows();
  }
  return detail::record(std::move(out), parts, "concat_rows", [](Node& self) {
    std::size_t off = 0;
    for (auto& in : self.inputs) {
      if (in->requires_grad) {
        Tensor& g = in->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[off * self.grad.cols() + i];
      }
      off += in->value.rows();
    }
  });
}

inline Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw std::invalid_argument("slice_cols: range out of bounds");
  Tensor out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = a.value()(r, begin + c);
  return detail::record(std::move(out), {a}, "slice_cols", [begin](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    for (std::size_t r = 0; r < self.grad.rows(); ++r)
      for (std::size_t c = 0; c < self.grad.cols(); ++c) g(r, begin + c) += self.grad(r, c);
  });
}

inline Var slice_rows(const Var& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.rows()) throw std::invalid_argument("slice_rows: range out of bounds");
  Tensor out(count, a.cols());
  std::copy_n(a.value().data() + begin * a.cols(), count * a.cols(), out.data());
  return detail::record(std::move(out), {a}, "slice_rows", [begin](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    const std::size_t offset = begin * g.cols();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
  });
}

/// Rows of a picked by index (repeats allowed).
inline Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  Tensor out(index.size(), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= a.rows()) throw std::invalid_argument("gather_rows: index out of bounds");
    std::copy_n(a.value().data() + index[i] * a.cols(), a.cols(), out.data() + i * a.cols());
  }
  return detail::record(std::move(out), {a}, "gather_rows", [index = std::move(index)](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    const std::size_t cols = g.cols();
    for (std::size_t i = 0; i < index.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) g(index[i], c) += self.grad(i, c);
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Var sum(const Var& a) {
  const auto& v = a.value().values();
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  return detail::record(Tensor::scalar(s), {a}, "sum", [](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    for (auto& x : g.values()) x += self.grad[0];
  });
}

/// Column-wise mean over rows: k x n -> 1 x n.
inline Var mean_rows(const Var& a) {
  if (a.rows() == 0) throw std::invalid_argument("mean_rows: empty input");
  Tensor out = detail::reduce_rows(a.value());
  const double inv = 1.0 / static_cast<double>(a.rows());
  for (auto& v : out.values()) v *= inv;
  return detail::record(std::move(out), {a}, "mean_rows", [inv](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) g(r, c) += inv * self.grad[c];
  });
}

/// Row-wise softmax.
inline Var softmax_rows(const Var& a) {
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double mx = out(r, 0);
    for (std::size_t c = 1; c < out.cols(); ++c) mx = std::max(mx, out(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < out.cols(); ++c) z += (out(r, c) = std::exp(out(r, c) - mx));
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) /= z;
  }
  return detail::record(std::move(out), {a}, "softmax_rows", [](Node& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Tensor& g = in.grad_buffer();
    const Tensor& y = self.value;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += self.grad(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) g(r, c) += y(r, c) * (self.grad(r, c) - dot);
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

inline double softplus_value(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var tanh(const Var& a) {
  return detail::unary(a, "tanh", [](double x) { return std::tanh(x); },
                       [](double, double y) { return 1.0 - y * y; });
}
inline Var sigmoid(const Var& a) {
  return detail::unary(a, "sigmoid", sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}
inline Var softplus(const Var& a) {
  return detail::unary(a, "softplus", softplus_value, [](double x, double) { return sigmoid_value(x); });
}
inline Var cos(const Var& a) {
  return detail::unary(a, "cos", [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}
inline Var square(const Var& a) {
  return detail::unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}
inline Var log(const Var& a) {
  return detail::unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}
inline Var exp(const Var& a) {
  return detail::unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

// ---------------------------------------------------------------------------
// Backward pass

/// Accumulates d(loss)/d(leaf) into every tracked leaf reachable from `loss`,
/// then releases the recorded graph. Calling it twice on the same loss throws.
inline void backward(const Var& loss) {
  if (!loss.defined() || loss.value().size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  const auto& root = loss.node();
  if (root->consumed) throw std::logic_error("backward: tape already consumed");
  if (!root->requires_grad) throw std::invalid_argument("backward: loss does not depend on any tracked leaf");
  if (root->leaf) {
    root->accumulate(Tensor::scalar(1.0));
    return;
  }

  // Iterative post-order DFS gives a topological order of interior nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && !child->leaf && !child->consumed && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  root->grad = Tensor::scalar(1.0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->grad.size() != 0 && n->backward) n->backward(*n);
  }
  for (Node* n : order) {
    n->grad = Tensor();
    n->inputs.clear();
    n->backward = nullptr;
    n->consumed = true;
  }
}

}  // namespace ad
}  // namespace rrhtpp
