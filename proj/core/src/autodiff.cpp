#include "triplegan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "triplegan/error.hpp"

namespace triplegan::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (auto s : shape) {
    if (s == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (numel(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                         " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on) {
    if (!grad_) grad_.emplace(data_.size(), 0.0);
  } else {
    grad_.reset();
  }
}

std::span<double> Tensor::grad() {
  if (!grad_) throw ContractError("tensor has no grad buffer");
  return *grad_;
}

std::span<const double> Tensor::grad() const {
  if (!grad_) throw ContractError("tensor has no grad buffer");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// --- graph ----------------------------------------------------------------

Var Graph::push(Node node) {
  for (auto in : node.inputs) {
    if (in >= nodes_.size()) throw ContractError("node input refers to a later or missing node");
    node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::parameter(Tensor& param) {
  if (!param.requires_grad()) param.set_requires_grad(true);
  Node n;
  n.op = Op::Parameter;
  n.value = param;
  n.value.set_requires_grad(false);
  n.needs_grad = true;
  n.bound = &param;
  return push(std::move(n));
}

const Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) throw ContractError("invalid graph variable");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

std::span<const double> Graph::grad(Var v) const { return node(v).grad; }

bool Graph::needs_grad(Var v) const { return node(v).needs_grad; }

namespace {

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

double activation_value(ActivationSpec spec, double x) {
  switch (spec.kind) {
    case ActivationKind::LeakyRelu:
      return x > 0.0 ? x : spec.slope * x;
    case ActivationKind::Softplus:
      return softplus_value(x);
    case ActivationKind::Sigmoid:
      return sigmoid_value(x);
    case ActivationKind::Tanh:
      return std::tanh(x);
  }
  return x;
}

double activation_derivative(ActivationSpec spec, double x) {
  switch (spec.kind) {
    case ActivationKind::LeakyRelu:
      return x > 0.0 ? 1.0 : spec.slope;
    case ActivationKind::Softplus:
      return sigmoid_value(x);
    case ActivationKind::Sigmoid: {
      double s = sigmoid_value(x);
      return s * (1.0 - s);
    }
    case ActivationKind::Tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

namespace {

// Backward rule for one node. `gy` is the node's accumulated output grad.
void propagate(std::vector<Node>& nodes, std::uint32_t id) {
  Node& n = nodes[id];
  const std::vector<double>& gy = n.grad;
  auto input_grad = [&](std::size_t k) -> std::vector<double>* {
    Node& in = nodes[n.inputs[k]];
    if (!in.needs_grad) return nullptr;
    if (in.grad.empty()) in.grad.assign(in.value.size(), 0.0);
    return &in.grad;
  };
  auto input_value = [&](std::size_t k) -> const Tensor& { return nodes[n.inputs[k]].value; };

  switch (n.op) {
    case Op::Constant:
      return;
    case Op::Parameter: {
      auto g = n.bound->grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      return;
    }
    case Op::Affine: {
      const Tensor& x = input_value(0);
      const Tensor& w = input_value(1);
      std::size_t batch = x.rows(), din = x.cols(), dout = w.cols();
      if (auto* gx = input_grad(0)) {
        for (std::size_t r = 0; r < batch; ++r) {
          const double* gyr = &gy[r * dout];
          for (std::size_t i = 0; i < din; ++i) {
            const double* wi = &w.data()[i * dout];
            double acc = 0.0;
            for (std::size_t j = 0; j < dout; ++j) acc += gyr[j] * wi[j];
            (*gx)[r * din + i] += acc;
          }
        }
      }
      if (auto* gw = input_grad(1)) {
        for (std::size_t r = 0; r < batch; ++r) {
          const double* gyr = &gy[r * dout];
          for (std::size_t i = 0; i < din; ++i) {
            double xi = x.data()[r * din + i];
            if (xi == 0.0) continue;
            double* gwi = &(*gw)[i * dout];
            for (std::size_t j = 0; j < dout; ++j) gwi[j] += xi * gyr[j];
          }
        }
      }
      if (auto* gb = input_grad(2)) {
        for (std::size_t r = 0; r < batch; ++r)
          for (std::size_t j = 0; j < dout; ++j) (*gb)[j] += gy[r * dout + j];
      }
      return;
    }
    case Op::Activation: {
      if (auto* gx = input_grad(0)) {
        ActivationSpec spec{n.act, n.a};
        const Tensor& x = input_value(0);
        for (std::size_t i = 0; i < gy.size(); ++i) {
          double d;
          switch (spec.kind) {
            case ActivationKind::Sigmoid: {
              double s = n.value[i];
              d = s * (1.0 - s);
              break;
            }
            case ActivationKind::Tanh: {
              double t = n.value[i];
              d = 1.0 - t * t;
              break;
            }
            default:
              d = activation_derivative(spec, x[i]);
          }
          (*gx)[i] += gy[i] * d;
        }
      }
      return;
    }
    case Op::LogSoftmax: {
      if (auto* gx = input_grad(0)) {
        std::size_t rows = n.value.rows(), k = n.value.cols();
        for (std::size_t r = 0; r < rows; ++r) {
          double total = 0.0;
          for (std::size_t j = 0; j < k; ++j) total += gy[r * k + j];
          for (std::size_t j = 0; j < k; ++j) {
            double p = std::exp(n.value[r * k + j]);
            (*gx)[r * k + j] += gy[r * k + j] - p * total;
          }
        }
      }
      return;
    }
    case Op::Exp: {
      if (auto* gx = input_grad(0))
        for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * n.value[i];
      return;
    }
    case Op::Log: {
      if (auto* gx = input_grad(0)) {
        const Tensor& x = input_value(0);
        for (std::size_t i = 0; i < gy.size(); ++i)
          if (x[i] > n.a) (*gx)[i] += gy[i] / x[i];
      }
      return;
    }
    case Op::Add:
    case Op::Sub: {
      double sign = n.op == Op::Add ? 1.0 : -1.0;
      if (auto* ga = input_grad(0))
        for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i];
      if (auto* gb = input_grad(1))
        for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += sign * gy[i];
      return;
    }
    case Op::Mul: {
      const Tensor& a = input_value(0);
      const Tensor& b = input_value(1);
      if (auto* ga = input_grad(0))
        for (std::size_t i = 0; i < gy.size(); ++i) (*ga)[i] += gy[i] * b[i];
      if (auto* gb = input_grad(1))
        for (std::size_t i = 0; i < gy.size(); ++i) (*gb)[i] += gy[i] * a[i];
      return;
    }
    case Op::Scale: {
      if (auto* gx = input_grad(0))
        for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i] * n.a;
      return;
    }
    case Op::AddScalar:
    case Op::Reshape: {
      if (auto* gx = input_grad(0))
        for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i];
      return;
    }
    case Op::Square: {
      if (auto* gx = input_grad(0)) {
        const Tensor& x = input_value(0);
        for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += 2.0 * x[i] * gy[i];
      }
      return;
    }
    case Op::Sum:
    case Op::Mean: {
      if (auto* gx = input_grad(0)) {
        double g = gy[0];
        if (n.op == Op::Mean) g /= static_cast<double>(gx->size());
        for (auto& v : *gx) v += g;
      }
      return;
    }
    case Op::RowSum: {
      if (auto* gx = input_grad(0)) {
        std::size_t k = input_value(0).cols();
        for (std::size_t r = 0; r < gy.size(); ++r)
          for (std::size_t j = 0; j < k; ++j) (*gx)[r * k + j] += gy[r];
      }
      return;
    }
    case Op::ColMean: {
      if (auto* gx = input_grad(0)) {
        const Tensor& x = input_value(0);
        std::size_t rows = x.rows(), k = x.cols();
        double inv = 1.0 / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < k; ++j) (*gx)[r * k + j] += gy[j] * inv;
      }
      return;
    }
    case Op::Gather: {
      if (auto* gx = input_grad(0)) {
        std::size_t k = input_value(0).cols();
        for (std::size_t r = 0; r < gy.size(); ++r) (*gx)[r * k + n.index[r]] += gy[r];
      }
      return;
    }
    case Op::ConcatCols: {
      std::size_t ca = input_value(0).cols(), cb = input_value(1).cols();
      std::size_t rows = n.value.rows(), c = ca + cb;
      if (auto* ga = input_grad(0))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < ca; ++j) (*ga)[r * ca + j] += gy[r * c + j];
      if (auto* gb = input_grad(1))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < cb; ++j) (*gb)[r * cb + j] += gy[r * c + ca + j];
      return;
    }
    case Op::Clamp: {
      if (auto* gx = input_grad(0)) {
        const Tensor& x = input_value(0);
        for (std::size_t i = 0; i < gy.size(); ++i)
          if (x[i] > n.a && x[i] < n.b) (*gx)[i] += gy[i];
      }
      return;
    }
  }
}

}  // namespace

void Graph::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  for (auto& n : nodes_) n.grad.clear();
  if (!root.needs_grad) return;
  nodes_[loss.id].grad.assign(1, 1.0);
  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.empty()) continue;
    propagate(nodes_, id);
  }
}

// --- op constructors -------------------------------------------------------

namespace {

Node unary(Op op, Var in, Tensor value) {
  Node n;
  n.op = op;
  n.inputs = {in.id};
  n.value = std::move(value);
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank2(const Tensor& a, const char* op) {
  if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

template <class F>
Var map_unary(Graph& g, Op op, Var in, F&& f) {
  const Tensor& x = g.value(in);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return g.push(unary(op, in, std::move(y)));
}

}  // namespace

Var affine(Graph& g, Var input, Var weight, Var bias) {
  const Tensor& x = g.value(input);
  const Tensor& w = g.value(weight);
  const Tensor& b = g.value(bias);
  if (x.rank() != 2 || w.rank() != 2 || x.cols() != w.rows() || b.size() != w.cols()) {
    throw DimensionError("affine: input " + shape_string(x.shape()) + " and weight " + shape_string(w.shape()) +
                         " (bias " + shape_string(b.shape()) + ") do not conform");
  }
  std::size_t batch = x.rows(), din = x.cols(), dout = w.cols();
  Tensor y({batch, dout});
  for (std::size_t r = 0; r < batch; ++r) {
    double* yr = &y.data()[r * dout];
    for (std::size_t j = 0; j < dout; ++j) yr[j] = b[j];
    for (std::size_t i = 0; i < din; ++i) {
      double xi = x[r * din + i];
      if (xi == 0.0) continue;
      const double* wi = &w.data()[i * dout];
      for (std::size_t j = 0; j < dout; ++j) yr[j] += xi * wi[j];
    }
  }
  Node n;
  n.op = Op::Affine;
  n.inputs = {input.id, weight.id, bias.id};
  n.value = std::move(y);
  return g.push(std::move(n));
}

Var activation(Graph& g, Var input, ActivationSpec spec) {
  if (spec.kind == ActivationKind::LeakyRelu && !(spec.slope > 0.0 && spec.slope < 1.0)) {
    throw ContractError("leaky_relu slope must lie in (0, 1)");
  }
  const Tensor& x = g.value(input);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activation_value(spec, x[i]);
  Node n = unary(Op::Activation, input, std::move(y));
  n.act = spec.kind;
  n.a = spec.slope;
  return g.push(std::move(n));
}

Var leaky_relu(Graph& g, Var input, double slope) {
  return activation(g, input, {ActivationKind::LeakyRelu, slope});
}
Var softplus(Graph& g, Var input) { return activation(g, input, {ActivationKind::Softplus}); }
Var sigmoid(Graph& g, Var input) { return activation(g, input, {ActivationKind::Sigmoid}); }
Var tanh(Graph& g, Var input) { return activation(g, input, {ActivationKind::Tanh}); }

Var log_softmax(Graph& g, Var input) {
  const Tensor& x = g.value(input);
  require_rank2(x, "log_softmax");
  std::size_t rows = x.rows(), k = x.cols();
  if (k < 2) throw DimensionError("log_softmax: need at least 2 classes");
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &x.data()[r * k];
    double m = *std::max_element(xr, xr + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(xr[j] - m);
    double lse = m + std::log(s);
    for (std::size_t j = 0; j < k; ++j) y[r * k + j] = xr[j] - lse;
  }
  return g.push(unary(Op::LogSoftmax, input, std::move(y)));
}

Var softmax(Graph& g, Var input) { return exp(g, log_softmax(g, input)); }

Var exp(Graph& g, Var input) {
  return map_unary(g, Op::Exp, input, [](double v) { return std::exp(v); });
}

Var log(Graph& g, Var input, double floor) {
  const Tensor& x = g.value(input);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x[i] > floor ? x[i] : floor;
    y[i] = std::log(v);
  }
  Node n = unary(Op::Log, input, std::move(y));
  n.a = floor;
  return g.push(std::move(n));
}

namespace {

template <class F>
Var binary(Graph& g, Op op, Var lhs, Var rhs, const char* name, F&& f) {
  const Tensor& a = g.value(lhs);
  const Tensor& b = g.value(rhs);
  require_same_shape(a, b, name);
  Tensor y(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = f(a[i], b[i]);
  Node n;
  n.op = op;
  n.inputs = {lhs.id, rhs.id};
  n.value = std::move(y);
  return g.push(std::move(n));
}

}  // namespace

Var add(Graph& g, Var lhs, Var rhs) {
  return binary(g, Op::Add, lhs, rhs, "add", [](double a, double b) { return a + b; });
}
Var sub(Graph& g, Var lhs, Var rhs) {
  return binary(g, Op::Sub, lhs, rhs, "sub", [](double a, double b) { return a - b; });
}
Var mul(Graph& g, Var lhs, Var rhs) {
  return binary(g, Op::Mul, lhs, rhs, "mul", [](double a, double b) { return a * b; });
}

Var scale(Graph& g, Var input, double factor) {
  const Tensor& x = g.value(input);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * factor;
  Node n = unary(Op::Scale, input, std::move(y));
  n.a = factor;
  return g.push(std::move(n));
}

Var add_scalar(Graph& g, Var input, double offset) {
  return map_unary(g, Op::AddScalar, input, [offset](double v) { return v + offset; });
}

Var one_minus(Graph& g, Var input) { return add_scalar(g, scale(g, input, -1.0), 1.0); }

Var square(Graph& g, Var input) {
  return map_unary(g, Op::Square, input, [](double v) { return v * v; });
}

Var sum(Graph& g, Var input) {
  const Tensor& x = g.value(input);
  double s = 0.0;
  for (double v : x.data()) s += v;
  return g.push(unary(Op::Sum, input, Tensor::scalar(s)));
}

Var mean(Graph& g, Var input) {
  const Tensor& x = g.value(input);
  double s = 0.0;
  for (double v : x.data()) s += v;
  return g.push(unary(Op::Mean, input, Tensor::scalar(s / static_cast<double>(x.size()))));
}

Var row_sum(Graph& g, Var input) {
  const Tensor& x = g.value(input);
  require_rank2(x, "row_sum");
  Tensor y({x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += x.at(r, j);
    y[r] = s;
  }
  return g.push(unary(Op::RowSum, input, std::move(y)));
}

Var col_mean(Graph& g, Var input) {
  const Tensor& x = g.value(input);
  require_rank2(x, "col_mean");
  Tensor y({x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t j = 0; j < x.cols(); ++j) y[j] += x.at(r, j);
  for (std::size_t j = 0; j < x.cols(); ++j) y[j] /= static_cast<double>(x.rows());
  return g.push(unary(Op::ColMean, input, std::move(y)));
}

Var gather(Graph& g, Var input, std::vector<std::size_t> index) {
  const Tensor& x = g.value(input);
  require_rank2(x, "gather");
  if (index.size() != x.rows()) {
    throw DimensionError("gather: " + std::to_string(index.size()) + " indices for " + shape_string(x.shape()));
  }
  Tensor y({x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (index[r] >= x.cols()) throw DimensionError("gather: column index out of range");
    y[r] = x.at(r, index[r]);
  }
  Node n = unary(Op::Gather, input, std::move(y));
  n.index = std::move(index);
  return g.push(std::move(n));
}

Var concat_cols(Graph& g, Var lhs, Var rhs) {
  const Tensor& a = g.value(lhs);
  const Tensor& b = g.value(rhs);
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) {
    throw DimensionError("concat_cols: " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                         " do not share a row count");
  }
  std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor y({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < ca; ++j) y.at(r, j) = a.at(r, j);
    for (std::size_t j = 0; j < cb; ++j) y.at(r, ca + j) = b.at(r, j);
  }
  Node n;
  n.op = Op::ConcatCols;
  n.inputs = {lhs.id, rhs.id};
  n.value = std::move(y);
  return g.push(std::move(n));
}

Var clamp(Graph& g, Var input, double lo, double hi) {
  const Tensor& x = g.value(input);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::clamp(x[i], lo, hi);
  Node n = unary(Op::Clamp, input, std::move(y));
  n.a = lo;
  n.b = hi;
  return g.push(std::move(n));
}

Var reshape(Graph& g, Var input, Shape shape) {
  const Tensor& x = g.value(input);
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> data(x.data().begin(), x.data().end());
  return g.push(unary(Op::Reshape, input, Tensor(std::move(shape), std::move(data))));
}

// --- finite differences ----------------------------------------------------

std::vector<double> finite_difference_gradient(const std::function<double(std::span<const double>)>& f,
                                               std::span<const double> theta, double h) {
  if (!(h > 0.0)) throw ContractError("finite difference step must be positive");
  std::vector<double> point(theta.begin(), theta.end());
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    double orig = point[i];
    point[i] = orig + h;
    double up = f(point);
    point[i] = orig - h;
    double down = f(point);
    point[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace triplegan::ad
