#include "aelstm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aelstm/error.hpp"

namespace aelstm {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::domain: return "domain";
    case ErrorKind::contract: return "contract";
    case ErrorKind::input: return "input";
    case ErrorKind::config: return "config";
    case ErrorKind::schema: return "schema";
    case ErrorKind::data: return "data";
    case ErrorKind::training: return "training";
    case ErrorKind::evaluation: return "evaluation";
    case ErrorKind::archive: return "archive";
    case ErrorKind::version: return "version";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_dims(const Shape& shape) {
  for (auto d : shape)
    if (d == 0) fail(ErrorKind::shape, "tensor dimensions must be positive, got " + shape_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_size(shape_))
    fail(ErrorKind::shape, "tensor data length " + std::to_string(data_.size()) +
                               " does not match shape " + shape_string(shape_));
  if (!all_finite()) fail(ErrorKind::input, "tensor contains non-finite values");
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, std::vector<double>{value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Tensor({rows, cols}, fill);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) fail(ErrorKind::shape, "ragged rows in Tensor::from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) fail(ErrorKind::shape, "rows() needs a rank-2 tensor, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) fail(ErrorKind::shape, "cols() needs a rank-2 tensor, got " + shape_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (!is_scalar()) fail(ErrorKind::shape, "item() on non-scalar tensor " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

const Tensor& Var::value() const { return graph_->value(*this); }
const Tensor& Var::grad() const { return graph_->grad(*this); }

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// ---------------------------------------------------------------------------
// Graph

Var Graph::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) fail(ErrorKind::input, "graph input contains non-finite values");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::push(OpTag op, Tensor value, std::uint32_t a, std::uint32_t b, std::uint8_t arity,
                double aux) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.arity = arity;
  n.parents[0] = a;
  n.parents[1] = b;
  n.aux = aux;
  n.requires_grad = nodes_[a].requires_grad || (arity == 2 && nodes_[b].requires_grad);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Graph::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.size() == 0) {
    // Lazily materialize zeros so callers always see the node's shape.
    auto& mutable_node = const_cast<Node&>(n);
    mutable_node.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

void Graph::ensure_grad(Node& n) {
  if (n.grad.size() != n.value.size()) n.grad = Tensor(n.value.shape(), 0.0);
}

void Graph::zero_grad() {
  for (auto& n : nodes_)
    if (n.grad.size()) n.grad.fill(0.0);
}

void Graph::backward(Var root) {
  if (root.valid() && &root.graph() != this) fail(ErrorKind::contract, "backward root belongs to another graph");
  const std::uint32_t rid = root.id();
  if (!nodes_.at(rid).value.is_scalar())
    fail(ErrorKind::contract, "backward requires a scalar root, got " + shape_string(nodes_[rid].value.shape()));
  for (std::uint32_t i = 0; i <= rid; ++i) {
    Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    ensure_grad(n);
    if (n.op != OpTag::leaf) n.grad.fill(0.0);
  }
  if (!nodes_[rid].requires_grad) return;
  nodes_[rid].grad[0] += 1.0;
  for (std::uint32_t i = rid + 1; i-- > 0;) {
    if (nodes_[i].requires_grad && nodes_[i].op != OpTag::leaf) backprop(i);
  }
}

namespace {

// Accumulate g (shape of the output) into a parent's grad, reducing when the
// parent was broadcast as a scalar.
template <class F>
void accumulate(Tensor& parent_grad, const Tensor& out_grad, F&& factor) {
  auto pg = parent_grad.data();
  auto og = out_grad.data();
  if (pg.size() == og.size()) {
    for (std::size_t k = 0; k < og.size(); ++k) pg[k] += factor(k) * og[k];
  } else {
    double acc = 0.0;
    for (std::size_t k = 0; k < og.size(); ++k) acc += factor(k) * og[k];
    pg[0] += acc;
  }
}

inline double at(const Tensor& t, std::size_t k) { return t.size() == 1 ? t[0] : t[k]; }

}  // namespace

void Graph::backprop(std::uint32_t id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  const Tensor& y = n.value;
  Node& pa = nodes_[n.parents[0]];
  Node* pb = n.arity == 2 ? &nodes_[n.parents[1]] : nullptr;
  const bool ga = pa.requires_grad;
  const bool gb = pb && pb->requires_grad;

  switch (n.op) {
    case OpTag::leaf:
      return;
    case OpTag::matmul: {
      const std::size_t m = pa.value.rows(), k = pa.value.cols(), c = pb->value.cols();
      const double* A = pa.value.data().data();
      const double* B = pb->value.data().data();
      const double* G = g.data().data();
      if (ga) {
        // dA = dC * B^T
        double* dA = pa.grad.data().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* gi = G + i * c;
            const double* bp = B + p * c;
            for (std::size_t j = 0; j < c; ++j) acc += gi[j] * bp[j];
            dA[i * k + p] += acc;
          }
      }
      if (gb) {
        // dB = A^T * dC
        double* dB = pb->grad.data().data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double a = A[i * k + p];
            if (a == 0.0) continue;
            const double* gi = G + i * c;
            double* dbp = dB + p * c;
            for (std::size_t j = 0; j < c; ++j) dbp[j] += a * gi[j];
          }
      }
      return;
    }
    case OpTag::add:
      if (ga) accumulate(pa.grad, g, [](std::size_t) { return 1.0; });
      if (gb) accumulate(pb->grad, g, [](std::size_t) { return 1.0; });
      return;
    case OpTag::sub:
      if (ga) accumulate(pa.grad, g, [](std::size_t) { return 1.0; });
      if (gb) accumulate(pb->grad, g, [](std::size_t) { return -1.0; });
      return;
    case OpTag::mul: {
      const Tensor& a = pa.value;
      const Tensor& b = pb->value;
      if (ga) accumulate(pa.grad, g, [&](std::size_t k) { return at(b, k); });
      if (gb) accumulate(pb->grad, g, [&](std::size_t k) { return at(a, k); });
      return;
    }
    case OpTag::div: {
      const Tensor& a = pa.value;
      const Tensor& b = pb->value;
      if (ga) accumulate(pa.grad, g, [&](std::size_t k) { return 1.0 / at(b, k); });
      if (gb)
        accumulate(pb->grad, g, [&](std::size_t k) {
          const double bk = at(b, k);
          return -at(a, k) / (bk * bk);
        });
      return;
    }
    case OpTag::sigmoid:
      accumulate(pa.grad, g, [&](std::size_t k) { return y[k] * (1.0 - y[k]); });
      return;
    case OpTag::tanh:
      accumulate(pa.grad, g, [&](std::size_t k) { return 1.0 - y[k] * y[k]; });
      return;
    case OpTag::softplus: {
      const Tensor& x = pa.value;
      accumulate(pa.grad, g, [&](std::size_t k) { return sigmoid(x[k]); });
      return;
    }
    case OpTag::log: {
      const Tensor& x = pa.value;
      accumulate(pa.grad, g, [&](std::size_t k) { return 1.0 / x[k]; });
      return;
    }
    case OpTag::square: {
      const Tensor& x = pa.value;
      accumulate(pa.grad, g, [&](std::size_t k) { return 2.0 * x[k]; });
      return;
    }
    case OpTag::relu: {
      const Tensor& x = pa.value;
      accumulate(pa.grad, g, [&](std::size_t k) { return x[k] > 0.0 ? 1.0 : 0.0; });
      return;
    }
    case OpTag::scale: {
      const double f = n.aux;
      accumulate(pa.grad, g, [f](std::size_t) { return f; });
      return;
    }
    case OpTag::shift:
      accumulate(pa.grad, g, [](std::size_t) { return 1.0; });
      return;
    case OpTag::sum: {
      const double s = g[0];
      for (auto& v : pa.grad.data()) v += s;
      return;
    }
    case OpTag::column: {
      const std::size_t j = static_cast<std::size_t>(n.aux);
      const std::size_t rows = pa.value.rows(), cols = pa.value.cols();
      for (std::size_t r = 0; r < rows; ++r) pa.grad[r * cols + j] += g[r];
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

Graph& same_graph(Var a, Var b) {
  if (!a.valid() || !b.valid() || &a.graph() != &b.graph())
    fail(ErrorKind::contract, "operands belong to different graphs");
  return a.graph();
}

Shape broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.is_scalar()) return a.shape();
  if (a.is_scalar()) return b.shape();
  fail(ErrorKind::shape, std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()));
}

template <class F>
Var binary(OpTag tag, const char* name, Var a, Var b, F&& f) {
  Graph& g = same_graph(a, b);
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  Tensor out(broadcast_shape(av, bv, name));
  auto o = out.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = f(at(av, k), at(bv, k));
  return g.push(tag, std::move(out), a.id(), b.id(), 2);
}

template <class F>
Var unary(OpTag tag, Var x, F&& f, double aux = 0.0) {
  Graph& g = x.graph();
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape());
  auto o = out.data();
  auto in = xv.data();
  for (std::size_t k = 0; k < o.size(); ++k) o[k] = f(in[k]);
  return g.push(tag, std::move(out), x.id(), 0, 1, aux);
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
    fail(ErrorKind::shape, "matmul: cannot multiply " + shape_string(A.shape()) + " by " + shape_string(B.shape()));
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C({m, n});
  double* c = C.data().data();
  const double* pa = A.data().data();
  const double* pb = B.data().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  return g.push(OpTag::matmul, std::move(C), a.id(), b.id(), 2);
}

Var add(Var a, Var b) {
  return binary(OpTag::add, "add", a, b, [](double x, double y) { return x + y; });
}
Var sub(Var a, Var b) {
  return binary(OpTag::sub, "sub", a, b, [](double x, double y) { return x - y; });
}
Var mul(Var a, Var b) {
  return binary(OpTag::mul, "mul", a, b, [](double x, double y) { return x * y; });
}
Var div(Var a, Var b) {
  for (double v : b.value().data())
    if (v == 0.0) fail(ErrorKind::domain, "div: division by zero");
  return binary(OpTag::div, "div", a, b, [](double x, double y) { return x / y; });
}

Var sigmoid(Var x) { return unary(OpTag::sigmoid, x, [](double v) { return sigmoid(v); }); }
Var tanh(Var x) { return unary(OpTag::tanh, x, [](double v) { return std::tanh(v); }); }
Var softplus(Var x) { return unary(OpTag::softplus, x, [](double v) { return softplus(v); }); }

Var log(Var x) {
  for (double v : x.value().data())
    if (!(v > 0.0)) fail(ErrorKind::domain, "log of non-positive value");
  return unary(OpTag::log, x, [](double v) { return std::log(v); });
}

Var square(Var x) { return unary(OpTag::square, x, [](double v) { return v * v; }); }
Var relu(Var x) { return unary(OpTag::relu, x, [](double v) { return v > 0.0 ? v : 0.0; }); }

Var scale(Var x, double factor) {
  return unary(OpTag::scale, x, [factor](double v) { return factor * v; }, factor);
}

Var shift(Var x, double offset) {
  return unary(OpTag::shift, x, [offset](double v) { return v + offset; }, offset);
}

Var sum(Var x) {
  Graph& g = x.graph();
  double s = 0.0;
  for (double v : g.value(x).data()) s += v;
  return g.push(OpTag::sum, Tensor::scalar(s), x.id(), 0, 1);
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var column(Var x, std::size_t j) {
  Graph& g = x.graph();
  const Tensor& xv = g.value(x);
  if (xv.rank() != 2 || j >= xv.cols())
    fail(ErrorKind::shape, "column " + std::to_string(j) + " out of range for " + shape_string(xv.shape()));
  const std::size_t rows = xv.rows();
  Tensor out({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) out[r] = xv(r, j);
  return g.push(OpTag::column, std::move(out), x.id(), 0, 1, static_cast<double>(j));
}

double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> analytic, std::span<const double> theta,
                         double step) {
  if (!(step > 0.0)) fail(ErrorKind::contract, "finite_diff_check: step must be positive");
  if (analytic.size() != theta.size())
    fail(ErrorKind::shape, "finite_diff_check: gradient and parameter lengths differ");
  std::vector<double> x(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double fp = f(x);
    x[i] = orig - step;
    const double fm = f(x);
    x[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      fail(ErrorKind::evaluation, "finite_diff_check: non-finite objective at coordinate " + std::to_string(i));
    const double fd = (fp - fm) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

}  // namespace aelstm
