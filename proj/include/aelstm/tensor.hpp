#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace aelstm {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Rank 2 is the working case; a tensor of
// size one acts as a scalar in broadcasting ops.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  // Rejects mismatched lengths and non-finite entries.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  bool is_scalar() const noexcept { return data_.size() == 1; }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double item() const;
  bool all_finite() const noexcept;
  void fill(double value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Graph;

// Handle to a node on a Graph tape. Cheap to copy; only valid while the graph
// lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Tensor& value() const;
  const Tensor& grad() const;

 private:
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class OpTag : std::uint8_t {
  leaf,
  matmul,
  add,
  sub,
  mul,
  div,
  sigmoid,
  tanh,
  softplus,
  log,
  square,
  relu,
  scale,
  shift,
  sum,
  column,
};

// Define-by-run tape. Nodes are appended in evaluation order, so the tape is
// already a topological order and backward is a single reverse sweep.
// A graph is confined to one thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  // Zero tensor of the node's shape when no gradient has reached it.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }

  // Seeds d(root)/d(root) = 1 and sweeps the tape. Leaf gradients accumulate
  // across calls; interior gradients are recomputed every call.
  void backward(Var root);
  void zero_grad();

  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by the op free functions.
  Var push(OpTag op, Tensor value, std::uint32_t a, std::uint32_t b, std::uint8_t arity,
           double aux = 0.0);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    OpTag op = OpTag::leaf;
    std::uint8_t arity = 0;
    bool requires_grad = false;
    std::uint32_t parents[2] = {0, 0};
    double aux = 0.0;
  };

  void ensure_grad(Node& n);
  void backprop(std::uint32_t id);

  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var sigmoid(Var x);
Var tanh(Var x);
Var softplus(Var x);
Var log(Var x);
Var square(Var x);
Var relu(Var x);
Var scale(Var x, double factor);
Var shift(Var x, double offset);
Var sum(Var x);
Var mean(Var x);
Var column(Var x, std::size_t j);

// Numerically stable scalar helpers shared with the plain-double code paths.
double sigmoid(double x) noexcept;
double softplus(double x) noexcept;

// Central-difference gradient check. `f` must be evaluable at theta +/- step
// along every coordinate. Returns max_i |analytic_i - fd_i| / max(1, |analytic_i|).
double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> analytic, std::span<const double> theta,
                         double step);

}  // namespace aelstm
