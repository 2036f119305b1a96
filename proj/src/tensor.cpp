#include "ren/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ren/special.hpp"

namespace ren {

namespace {

using detail::Node;

thread_local Tape* g_current_tape = nullptr;

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

[[noreturn]] void fail_shapes(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) +
                              " and " + shape_str(b) + " do not conform");
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  return n;
}

Tensor finish_op(const char* op, std::shared_ptr<Node> n,
                 const std::vector<Tensor>& inputs,
                 std::function<void(Node&)> backprop) {
  for (const Tensor& t : inputs) {
    if (!t.defined())
      throw std::invalid_argument(std::string(op) + ": undefined input");
    if (t.needs_grad()) n->needs_grad = true;
    n->inputs.push_back(t.handle());
  }
  if (n->needs_grad) {
    n->grad.assign(n->value.size(), 0.0);
    n->backprop = std::move(backprop);
  }
  Tape* tape = Tape::current();
  if (tape == nullptr)
    throw std::logic_error(std::string(op) + ": no active tape");
  tape->record(n);
  return Tensor(std::move(n));
}

// View of an input padded to rank 2 with broadcast-aware strides.
struct PaddedView {
  long rows, cols;    // padded extents
  long rs, cs;        // strides; 0 on broadcast axes
};

PaddedView pad_view(const Shape& s) {
  PaddedView v{1, 1, 0, 0};
  if (s.size() == 1) {
    v.cols = s[0];
  } else if (s.size() == 2) {
    v.rows = s[0];
    v.cols = s[1];
  }
  v.cs = v.cols > 1 ? 1 : 0;
  v.rs = v.rows > 1 ? v.cols : 0;
  return v;
}

struct BroadcastPlan {
  Shape out_shape;
  long rows, cols;
  PaddedView a, b;
};

BroadcastPlan broadcast_plan(const char* op, const Shape& sa, const Shape& sb) {
  BroadcastPlan p;
  p.a = pad_view(sa);
  p.b = pad_view(sb);
  auto join = [&](long x, long y) -> long {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    fail_shapes(op, sa, sb);
  };
  p.rows = join(p.a.rows, p.b.rows);
  p.cols = join(p.a.cols, p.b.cols);
  const std::size_t out_rank = std::max(sa.size(), sb.size());
  if (out_rank == 0)
    p.out_shape = {};
  else if (out_rank == 1)
    p.out_shape = {p.cols};
  else
    p.out_shape = {p.rows, p.cols};
  return p;
}

template <typename F, typename DFA, typename DFB>
Tensor binary_elementwise(const char* op, const Tensor& a, const Tensor& b,
                          F f, DFA dfa, DFB dfb) {
  BroadcastPlan p = broadcast_plan(op, a.shape(), b.shape());
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  std::vector<double> out(static_cast<std::size_t>(p.rows * p.cols));
  for (long i = 0; i < p.rows; ++i) {
    for (long j = 0; j < p.cols; ++j) {
      out[static_cast<std::size_t>(i * p.cols + j)] =
          f(pa[i * p.a.rs + j * p.a.cs], pb[i * p.b.rs + j * p.b.cs]);
    }
  }
  auto n = make_node(p.out_shape, std::move(out));
  return finish_op(op, n, {a, b}, [p, dfa, dfb](Node& self) {
    Tensor ta(self.inputs[0]);
    Tensor tb(self.inputs[1]);
    const double* pa = ta.data().data();
    const double* pb = tb.data().data();
    const double* g = self.grad.data();
    for (long i = 0; i < p.rows; ++i) {
      for (long j = 0; j < p.cols; ++j) {
        const double gv = g[i * p.cols + j];
        const double av = pa[i * p.a.rs + j * p.a.cs];
        const double bv = pb[i * p.b.rs + j * p.b.cs];
        ta.accum_grad(i * p.a.rs + j * p.a.cs, gv * dfa(av, bv));
        tb.accum_grad(i * p.b.rs + j * p.b.cs, gv * dfb(av, bv));
      }
    }
  });
}

template <typename F, typename DF>
Tensor unary_elementwise(const char* op, const Tensor& x, F f,
                         DF df /* (x, fx) */, bool positive_only = false) {
  const auto& in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (positive_only && !(in[i] > 0.0)) {
      throw std::domain_error(std::string(op) + ": input must be > 0, got " +
                              std::to_string(in[i]) + " at flat index " +
                              std::to_string(i));
    }
    out[i] = f(in[i]);
  }
  auto n = make_node(x.shape(), std::move(out));
  return finish_op(op, n, {x}, [df](Node& self) {
    Tensor tx(self.inputs[0]);
    const double* px = tx.data().data();
    const double* pv = self.value.data();
    const double* g = self.grad.data();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      tx.accum_grad(static_cast<long>(i), g[i] * df(px[i], pv[i]));
    }
  });
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

long shape_numel(const Shape& s) {
  long n = 1;
  for (long d : s) n *= d;
  return n;
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  for (long d : shape)
    if (d <= 0) throw std::invalid_argument("param: non-positive extent");
  if (shape_numel(shape) != static_cast<long>(data.size()))
    throw std::invalid_argument("param: data length " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto n = make_node(std::move(shape), std::move(data));
  n->needs_grad = true;
  n->is_leaf = true;
  n->grad.assign(n->value.size(), 0.0);
  return Tensor(std::move(n));
}

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  for (long d : shape)
    if (d <= 0) throw std::invalid_argument("constant: non-positive extent");
  if (shape_numel(shape) != static_cast<long>(data.size()))
    throw std::invalid_argument("constant: data length " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto n = make_node(std::move(shape), std::move(data));
  n->is_leaf = true;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return constant({}, {v}); }

Tensor Tensor::zeros(Shape shape) {
  std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  return constant(std::move(shape), std::move(d));
}

Tensor Tensor::full(Shape shape, double v) {
  std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)), v);
  return constant(std::move(shape), std::move(d));
}

const Shape& Tensor::shape() const { return node_->shape; }
long Tensor::rank() const { return static_cast<long>(node_->shape.size()); }
long Tensor::numel() const { return static_cast<long>(node_->value.size()); }
bool Tensor::needs_grad() const { return node_ && node_->needs_grad; }
bool Tensor::is_leaf() const { return node_ && node_->is_leaf; }

std::vector<double>& Tensor::data() { return node_->value; }
const std::vector<double>& Tensor::data() const { return node_->value; }
const std::vector<double>& Tensor::grad() const { return node_->grad; }

void Tensor::accum_grad(long idx, double v) {
  if (node_->needs_grad) node_->grad[static_cast<std::size_t>(idx)] += v;
}

void Tensor::zero_grad() {
  if (node_->needs_grad) node_->grad.assign(node_->value.size(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1)
    throw std::invalid_argument("item: tensor has " + std::to_string(numel()) +
                                " elements, expected 1");
  return node_->value[0];
}

// ---- Tape -------------------------------------------------------------------

Tape::Tape() : prev_(g_current_tape) { g_current_tape = this; }

Tape::~Tape() { g_current_tape = prev_; }

Tape* Tape::current() { return g_current_tape; }

void Tape::record(std::shared_ptr<detail::Node> n) {
  nodes_.push_back(std::move(n));
}

void Tape::backward(const Tensor& output) {
  if (!output.defined() || output.numel() != 1)
    throw std::invalid_argument("backward: output must be a single element");
  if (!std::isfinite(output.item()))
    throw std::runtime_error("backward: output value is not finite");
  Node* out = output.node();
  bool found = false;
  for (const auto& n : nodes_)
    if (n.get() == out) found = true;
  if (!found)
    throw std::invalid_argument("backward: output is not on this tape");
  if (!out->needs_grad) return;
  out->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.needs_grad && n.backprop) n.backprop(n);
  }
}

// ---- Primitives -------------------------------------------------------------

Tensor custom_op(
    Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
    std::function<void(const Tensor&, std::vector<Tensor>&)> backward) {
  if (shape_numel(shape) != static_cast<long>(value.size()))
    throw std::invalid_argument("custom_op: value length does not match shape");
  auto n = make_node(std::move(shape), std::move(value));
  auto bw = std::move(backward);
  return finish_op("custom_op", n, inputs, [bw](Node& self) {
    std::vector<Tensor> ins;
    ins.reserve(self.inputs.size());
    for (auto& p : self.inputs) ins.emplace_back(p);
    // Non-owning alias; self outlives the call.
    Tensor self_t(std::shared_ptr<Node>(std::shared_ptr<void>(), &self));
    bw(self_t, ins);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
    fail_shapes("matmul", a.shape(), b.shape());
  const long m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(m * n));
  CMapMat ma(a.data().data(), m, k), mb(b.data().data(), k, n);
  MapMat(out.data(), m, n).noalias() = ma * mb;
  auto node = make_node({m, n}, std::move(out));
  return finish_op("matmul", node, {a, b}, [m, k, n](Node& self) {
    Tensor ta(self.inputs[0]);
    Tensor tb(self.inputs[1]);
    CMapMat g(self.grad.data(), m, n);
    CMapMat ma(ta.data().data(), m, k), mb(tb.data().data(), k, n);
    if (ta.needs_grad())
      MapMat(ta.node()->grad.data(), m, k).noalias() += g * mb.transpose();
    if (tb.needs_grad())
      MapMat(tb.node()->grad.data(), k, n).noalias() += ma.transpose() * g;
  });
}

Tensor exp(const Tensor& x) {
  return unary_elementwise(
      "exp", x, [](double v) { return std::exp(v); },
      [](double, double fx) { return fx; });
}

Tensor log(const Tensor& x) {
  return unary_elementwise(
      "log", x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; }, /*positive_only=*/true);
}

Tensor tanh(const Tensor& x) {
  return unary_elementwise(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double fx) { return 1.0 - fx * fx; });
}

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_elementwise(
      "sigmoid", x,
      [](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                        : std::exp(v) / (1.0 + std::exp(v));
      },
      [](double, double fx) { return fx * (1.0 - fx); });
}

Tensor softplus(const Tensor& x) {
  return unary_elementwise(
      "softplus", x,
      [](double v) {
        return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      },
      [](double v, double) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                        : std::exp(v) / (1.0 + std::exp(v));
      });
}

Tensor square(const Tensor& x) {
  return unary_elementwise(
      "square", x, [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor neg(const Tensor& x) {
  return unary_elementwise(
      "neg", x, [](double v) { return -v; },
      [](double, double) { return -1.0; });
}

Tensor lgamma(const Tensor& x) {
  return unary_elementwise(
      "lgamma", x, [](double v) { return lgamma_fn(v); },
      [](double v, double) { return ren::digamma(v); },
      /*positive_only=*/true);
}

Tensor digamma(const Tensor& x) {
  return unary_elementwise(
      "digamma", x, [](double v) { return ren::digamma(v); },
      [](double v, double) { return trigamma(v); },
      /*positive_only=*/true);
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto n = make_node({}, {acc});
  return finish_op("sum", n, {x}, [](Node& self) {
    Tensor tx(self.inputs[0]);
    const double g = self.grad[0];
    for (long i = 0; i < tx.numel(); ++i) tx.accum_grad(i, g);
  });
}

Tensor sum(const Tensor& x, int axis) {
  if (x.rank() == 0 || axis < 0 || axis >= x.rank())
    throw std::invalid_argument("sum: axis " + std::to_string(axis) +
                                " invalid for shape " + shape_str(x.shape()));
  if (x.rank() == 1) return sum(x);
  const long rows = x.shape()[0], cols = x.shape()[1];
  const long keep = axis == 0 ? cols : rows;
  std::vector<double> out(static_cast<std::size_t>(keep), 0.0);
  const double* p = x.data().data();
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) out[axis == 0 ? j : i] += p[i * cols + j];
  auto n = make_node({keep}, std::move(out));
  return finish_op("sum", n, {x}, [rows, cols, axis](Node& self) {
    Tensor tx(self.inputs[0]);
    const double* g = self.grad.data();
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j)
        tx.accum_grad(i * cols + j, g[axis == 0 ? j : i]);
  });
}

Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.numel());
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  auto n = make_node({}, {acc * inv});
  return finish_op("mean", n, {x}, [inv](Node& self) {
    Tensor tx(self.inputs[0]);
    const double g = self.grad[0] * inv;
    for (long i = 0; i < tx.numel(); ++i) tx.accum_grad(i, g);
  });
}

Tensor mean(const Tensor& x, int axis) {
  if (x.rank() == 0 || axis < 0 || axis >= x.rank())
    throw std::invalid_argument("mean: axis " + std::to_string(axis) +
                                " invalid for shape " + shape_str(x.shape()));
  if (x.rank() == 1) return mean(x);
  const long denom = x.shape()[axis];
  return sum(x, axis) * (1.0 / static_cast<double>(denom));
}

Tensor broadcast_to(const Tensor& x, const Shape& target) {
  BroadcastPlan p = broadcast_plan("broadcast_to", x.shape(), target);
  if (p.out_shape != target)
    fail_shapes("broadcast_to", x.shape(), target);
  const double* px = x.data().data();
  std::vector<double> out(static_cast<std::size_t>(p.rows * p.cols));
  for (long i = 0; i < p.rows; ++i)
    for (long j = 0; j < p.cols; ++j)
      out[i * p.cols + j] = px[i * p.a.rs + j * p.a.cs];
  auto n = make_node(target, std::move(out));
  return finish_op("broadcast_to", n, {x}, [p](Node& self) {
    Tensor tx(self.inputs[0]);
    const double* g = self.grad.data();
    for (long i = 0; i < p.rows; ++i)
      for (long j = 0; j < p.cols; ++j)
        tx.accum_grad(i * p.a.rs + j * p.a.cs, g[i * p.cols + j]);
  });
}

Tensor reshape(const Tensor& x, const Shape& target) {
  if (shape_numel(target) != x.numel())
    fail_shapes("reshape", x.shape(), target);
  auto n = make_node(target, x.data());
  return finish_op("reshape", n, {x}, [](Node& self) {
    Tensor tx(self.inputs[0]);
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      tx.accum_grad(static_cast<long>(i), self.grad[i]);
  });
}

Tensor slice(const Tensor& x, int axis, long begin, long end) {
  if (x.rank() == 0 || axis < 0 || axis >= x.rank())
    throw std::invalid_argument("slice: axis " + std::to_string(axis) +
                                " invalid for shape " + shape_str(x.shape()));
  const long extent = x.shape()[axis];
  if (begin < 0 || end > extent || begin >= end)
    throw std::invalid_argument(
        "slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
        ") invalid for extent " + std::to_string(extent));
  const long cols = x.rank() == 2 ? x.shape()[1] : 1;
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  const double* p = x.data().data();
  const long r0 = axis == 0 ? begin : 0;
  const long c0 = axis == 1 ? begin : 0;
  const long or_ = out_shape[0];
  const long oc = out_shape.size() == 2 ? out_shape[1] : 1;
  for (long i = 0; i < or_; ++i)
    for (long j = 0; j < oc; ++j)
      out[i * oc + j] = p[(i + r0) * cols + (j + c0)];
  auto n = make_node(out_shape, std::move(out));
  return finish_op("slice", n, {x}, [cols, r0, c0, or_, oc](Node& self) {
    Tensor tx(self.inputs[0]);
    const double* g = self.grad.data();
    for (long i = 0; i < or_; ++i)
      for (long j = 0; j < oc; ++j)
        tx.accum_grad((i + r0) * cols + (j + c0), g[i * oc + j]);
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  const long rank = parts[0].rank();
  if (rank == 0 || axis < 0 || axis >= rank)
    throw std::invalid_argument("concat: axis " + std::to_string(axis) +
                                " invalid for rank " + std::to_string(rank));
  Shape out_shape = parts[0].shape();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const Shape& s = parts[i].shape();
    if (static_cast<long>(s.size()) != rank)
      fail_shapes("concat", parts[0].shape(), s);
    for (long d = 0; d < rank; ++d) {
      if (d == axis) continue;
      if (s[d] != out_shape[d]) fail_shapes("concat", parts[0].shape(), s);
    }
    out_shape[axis] += s[axis];
  }
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  const long oc = rank == 2 ? out_shape[1] : 1;
  std::vector<long> offsets;  // per part, along the concat axis
  long off = 0;
  for (const Tensor& t : parts) {
    offsets.push_back(off);
    const long pr = t.shape()[0];
    const long pc = rank == 2 ? t.shape()[1] : 1;
    const double* p = t.data().data();
    for (long i = 0; i < pr; ++i) {
      for (long j = 0; j < pc; ++j) {
        const long oi = axis == 0 ? i + off : i;
        const long oj = (rank == 2 && axis == 1) ? j + off : j;
        out[oi * oc + oj] = p[i * pc + j];
      }
    }
    off += t.shape()[axis];
  }
  auto n = make_node(out_shape, std::move(out));
  return finish_op("concat", n, parts, [axis, oc, rank, offsets](Node& self) {
    const double* g = self.grad.data();
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      Tensor t(self.inputs[k]);
      const long pr = t.shape()[0];
      const long pc = rank == 2 ? t.shape()[1] : 1;
      const long off = offsets[k];
      for (long i = 0; i < pr; ++i) {
        for (long j = 0; j < pc; ++j) {
          const long oi = axis == 0 ? i + off : i;
          const long oj = (rank == 2 && axis == 1) ? j + off : j;
          t.accum_grad(i * pc + j, g[oi * oc + oj]);
        }
      }
    }
  });
}

}  // namespace ren
