#pragma once

// Minimal define-by-run reverse-mode differentiation over dense f64 tensors.
//
// A Graph is an append-only tape. Every op appends one node whose inputs are
// earlier nodes, so append order is a topological order and backward() is a
// single reverse sweep. Parameters live outside the graph: Graph::parameter()
// binds a Tensor by reference and backward() accumulates into its grad buffer.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace triplegan::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  // Trailing extent; 1 for rank-1 tensors.
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool requires_grad() const { return requires_grad_; }
  // Enabling allocates a zeroed grad buffer; disabling drops it.
  void set_requires_grad(bool on);
  bool has_grad() const { return grad_.has_value(); }
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::optional<std::vector<double>> grad_;
};

struct Var {
  static constexpr std::uint32_t kInvalid = 0xffffffffu;
  std::uint32_t id = kInvalid;
  bool valid() const { return id != kInvalid; }
};

enum class Op : std::uint8_t {
  Constant,
  Parameter,
  Affine,
  Activation,
  LogSoftmax,
  Exp,
  Log,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  Square,
  Sum,
  Mean,
  RowSum,
  ColMean,
  Gather,
  ConcatCols,
  Clamp,
  Reshape,
};

enum class ActivationKind : std::uint8_t { LeakyRelu, Softplus, Sigmoid, Tanh };

struct ActivationSpec {
  ActivationKind kind = ActivationKind::LeakyRelu;
  double slope = 0.2;  // leaky_relu only
};

struct Node {
  Op op = Op::Constant;
  std::vector<std::uint32_t> inputs;
  Tensor value;
  std::vector<double> grad;
  bool needs_grad = false;
  double a = 0.0;
  double b = 0.0;
  ActivationKind act = ActivationKind::LeakyRelu;
  std::vector<std::size_t> index;
  Tensor* bound = nullptr;
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Var constant(Tensor value);
  // The tensor must outlive the graph's backward pass.
  Var parameter(Tensor& param);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() loss with respect to v; empty if v was
  // not on a differentiable path.
  std::span<const double> grad(Var v) const;
  bool needs_grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  const Node& node(Var v) const;

  void backward(Var loss);

  // Used by op implementations.
  Var push(Node node);

 private:
  std::vector<Node> nodes_;
};

// --- ops ------------------------------------------------------------------

Var affine(Graph& g, Var input, Var weight, Var bias);
Var activation(Graph& g, Var input, ActivationSpec spec);
Var leaky_relu(Graph& g, Var input, double slope = 0.2);
Var softplus(Graph& g, Var input);
Var sigmoid(Graph& g, Var input);
Var tanh(Graph& g, Var input);
Var log_softmax(Graph& g, Var input);
Var softmax(Graph& g, Var input);
Var exp(Graph& g, Var input);
// log(max(x, floor)); the derivative is zero where the floor is active.
Var log(Graph& g, Var input, double floor = 0.0);
Var add(Graph& g, Var lhs, Var rhs);
Var sub(Graph& g, Var lhs, Var rhs);
Var mul(Graph& g, Var lhs, Var rhs);
Var scale(Graph& g, Var input, double factor);
Var add_scalar(Graph& g, Var input, double offset);
Var one_minus(Graph& g, Var input);
Var square(Graph& g, Var input);
Var sum(Graph& g, Var input);
Var mean(Graph& g, Var input);
// [batch, K] -> [batch]
Var row_sum(Graph& g, Var input);
// [batch, K] -> [K]
Var col_mean(Graph& g, Var input);
// [batch, K] -> [batch], picking column index[b] from row b.
Var gather(Graph& g, Var input, std::vector<std::size_t> index);
Var concat_cols(Graph& g, Var lhs, Var rhs);
Var clamp(Graph& g, Var input, double lo, double hi);
Var reshape(Graph& g, Var input, Shape shape);

// Scalar activation functions shared with non-graph code.
double activation_value(ActivationSpec spec, double x);
double activation_derivative(ActivationSpec spec, double x);

// Central differences (f(θ+h·e_i) − f(θ−h·e_i)) / 2h for every coordinate.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> theta, double h = 1e-5);

// max_i |a_i − b_i| / max(1, |a_i|, |b_i|)
double max_relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace triplegan::ad
