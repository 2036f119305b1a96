#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ren {

/// Row-major dense extents. Rank 0 (scalar), 1 (vector) and 2 (matrix) are
/// supported; that covers every batched computation in this project.
using Shape = std::vector<long>;

std::string shape_str(const Shape& s);
long shape_numel(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized with zeros iff needs_grad
  bool needs_grad = false;
  bool is_leaf = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backprop;
};

}  // namespace detail

class Tape;

/// Handle to a node in a differentiable computation. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  /// Leaf with requires_grad set; lives across tapes (model parameters).
  static Tensor param(Shape shape, std::vector<double> data);
  /// Leaf without gradient tracking.
  static Tensor constant(Shape shape, std::vector<double> data);
  static Tensor scalar(double v);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  long rank() const;
  long numel() const;
  bool needs_grad() const;
  bool is_leaf() const;

  std::vector<double>& data();
  const std::vector<double>& data() const;
  /// Gradient buffer; empty unless needs_grad.
  const std::vector<double>& grad() const;
  void accum_grad(long idx, double v);
  void zero_grad();

  /// Value of a single-element tensor.
  double item() const;

  /// Internal: direct node access, used by op implementations.
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& handle() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Records ops in creation order; reverse pass runs their backprops in
/// reverse. Construction installs the tape as the active one for this
/// thread; destruction restores the previous.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Accumulates d(output)/d(leaf) into every reachable needs_grad leaf.
  /// output must be a single-element tensor recorded on this tape.
  void backward(const Tensor& output);

  std::size_t size() const { return nodes_.size(); }

  static Tape* current();
  void record(std::shared_ptr<detail::Node> n);

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
  Tape* prev_ = nullptr;
};

// Elementwise binary ops with trailing-dimension broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// Strict rank-2 matrix product.
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise unary ops.
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);  // requires strictly positive input
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);  // gradient at 0 is 0
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor square(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor lgamma(const Tensor& x);   // requires strictly positive input
Tensor digamma(const Tensor& x);  // requires strictly positive input

// Reductions.
Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, int axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, int axis);

// Shape ops.
Tensor broadcast_to(const Tensor& x, const Shape& target);
Tensor reshape(const Tensor& x, const Shape& target);
Tensor slice(const Tensor& x, int axis, long begin, long end);
Tensor concat(const std::vector<Tensor>& parts, int axis);

/// Extension point: record an op with caller-supplied forward value and
/// backward rule. backward receives the finished output node (for value and
/// grad) and handles to the inputs, and must accumulate into input grads.
Tensor custom_op(
    Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
    std::function<void(const Tensor& out, std::vector<Tensor>& inputs)>
        backward);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator+(const Tensor& a, double b) {
  return add(a, Tensor::scalar(b));
}
inline Tensor operator+(double a, const Tensor& b) {
  return add(Tensor::scalar(a), b);
}
inline Tensor operator-(const Tensor& a, double b) {
  return sub(a, Tensor::scalar(b));
}
inline Tensor operator-(double a, const Tensor& b) {
  return sub(Tensor::scalar(a), b);
}
inline Tensor operator*(const Tensor& a, double b) {
  return mul(a, Tensor::scalar(b));
}
inline Tensor operator*(double a, const Tensor& b) {
  return mul(Tensor::scalar(a), b);
}
inline Tensor operator/(const Tensor& a, double b) {
  return div(a, Tensor::scalar(b));
}
inline Tensor operator/(double a, const Tensor& b) {
  return div(Tensor::scalar(a), b);
}

}  // namespace ren
