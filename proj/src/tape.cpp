#include "cgl/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace cgl {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.dim(0)),
                  static_cast<Eigen::Index>(t.dim(1)));
}

// Split of a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tape& common_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string(op) + ": operands recorded on different tapes");
  }
  return a.tape();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

Tape::Node make_node(OpKind op, std::vector<std::size_t> inputs, Tensor value) {
  Tape::Node n;
  n.op = op;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  return n;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kScale: return "scale";
    case OpKind::kElu: return "elu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSumAxis: return "sum";
    case OpKind::kSumAll: return "sum_all";
    case OpKind::kMeanAll: return "mean_all";
    case OpKind::kSquaredError: return "squared_error";
    case OpKind::kGather: return "gather";
    case OpKind::kReshape: return "reshape";
    case OpKind::kStack: return "stack";
    case OpKind::kStandardize: return "standardize";
  }
  return "?";
}

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n = make_node(OpKind::kLeaf, {}, std::move(value));
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Node node) {
  node.requires_grad = std::any_of(node.inputs.begin(), node.inputs.end(),
                                   [&](std::size_t i) { return nodes_[i].requires_grad; });
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::grad(Var v) const {
  const std::size_t id = v.id();
  if (id < grads_.size() && grads_[id].size() == nodes_[id].value.size() &&
      grads_[id].shape() == nodes_[id].value.shape()) {
    return grads_[id];
  }
  zero_grad_ = Tensor(nodes_.at(id).value.shape(), 0.0);
  return zero_grad_;
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Tensor& dst = grads_[id];
  if (dst.shape() != nodes_[id].value.shape() || dst.size() != g.size()) {
    dst = Tensor(nodes_[id].value.shape(), std::vector<double>(g.values()));
    return;
  }
  auto d = dst.data();
  auto s = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

void Tape::accumulate(std::size_t id, std::vector<double>&& g) {
  Tensor& dst = grads_[id];
  if (dst.shape() != nodes_[id].value.shape() || dst.size() != g.size()) {
    dst = Tensor(nodes_[id].value.shape(), std::move(g));
    return;
  }
  auto d = dst.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
}

void Tape::backward(Var loss) {
  const std::size_t root = loss.id();
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss is not on this tape");
  if (nodes_.at(root).value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     to_string(nodes_[root].value.shape()));
  }
  grads_.assign(nodes_.size(), Tensor());
  grads_[root] = Tensor(nodes_[root].value.shape(), 1.0);

  for (std::size_t id = root + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.op == OpKind::kLeaf) continue;
    if (grads_[id].shape() != n.value.shape() || grads_[id].size() != n.value.size()) continue;
    const Tensor& g = grads_[id];
    auto needs = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };
    auto in = [&](std::size_t k) -> const Tensor& { return nodes_[n.inputs[k]].value; };

    switch (n.op) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatMul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        auto gm = as_matrix(g);
        if (needs(0)) {
          std::vector<double> ga(a.size());
          MutMap(ga.data(), a.dim(0), a.dim(1)).noalias() = gm * as_matrix(b).transpose();
          accumulate(n.inputs[0], std::move(ga));
        }
        if (needs(1)) {
          std::vector<double> gb(b.size());
          MutMap(gb.data(), b.dim(0), b.dim(1)).noalias() = as_matrix(a).transpose() * gm;
          accumulate(n.inputs[1], std::move(gb));
        }
        break;
      }
      case OpKind::kAdd:
        if (needs(0)) accumulate(n.inputs[0], g);
        if (needs(1)) accumulate(n.inputs[1], g);
        break;
      case OpKind::kSub:
        if (needs(0)) accumulate(n.inputs[0], g);
        if (needs(1)) {
          std::vector<double> gb(g.values());
          for (double& v : gb) v = -v;
          accumulate(n.inputs[1], std::move(gb));
        }
        break;
      case OpKind::kMul: {
        const auto a = in(0).data();
        const auto b = in(1).data();
        const auto gd = g.data();
        if (needs(0)) {
          std::vector<double> ga(gd.size());
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = gd[i] * b[i];
          accumulate(n.inputs[0], std::move(ga));
        }
        if (needs(1)) {
          std::vector<double> gb(gd.size());
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] = gd[i] * a[i];
          accumulate(n.inputs[1], std::move(gb));
        }
        break;
      }
      case OpKind::kAddBias: {
        if (needs(0)) accumulate(n.inputs[0], g);
        if (needs(1)) {
          const std::size_t width = in(1).size();
          std::vector<double> gb(width, 0.0);
          const auto gd = g.data();
          for (std::size_t i = 0; i < gd.size(); ++i) gb[i % width] += gd[i];
          accumulate(n.inputs[1], std::move(gb));
        }
        break;
      }
      case OpKind::kScale: {
        std::vector<double> gx(g.values());
        for (double& v : gx) v *= n.scalar;
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kElu: {
        const auto x = in(0).data();
        const auto y = n.value.data();
        const auto gd = g.data();
        std::vector<double> gx(gd.size());
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = x[i] > 0.0 ? gd[i] : gd[i] * (y[i] + 1.0);
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kSigmoid: {
        const auto y = n.value.data();
        const auto gd = g.data();
        std::vector<double> gx(gd.size());
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = gd[i] * y[i] * (1.0 - y[i]);
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kSoftmax: {
        const AxisSplit s = split_at(n.value.shape(), n.axis);
        const auto y = n.value.data();
        const auto gd = g.data();
        std::vector<double> gx(gd.size());
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.extent * s.inner + i;
            double dot = 0.0;
            for (std::size_t e = 0; e < s.extent; ++e) {
              const std::size_t at = base + e * s.inner;
              dot += gd[at] * y[at];
            }
            for (std::size_t e = 0; e < s.extent; ++e) {
              const std::size_t at = base + e * s.inner;
              gx[at] = y[at] * (gd[at] - dot);
            }
          }
        }
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kSumAxis: {
        const AxisSplit s = split_at(in(0).shape(), n.axis);
        const auto gd = g.data();
        std::vector<double> gx(in(0).size());
        for (std::size_t o = 0; o < s.outer; ++o) {
          for (std::size_t e = 0; e < s.extent; ++e) {
            for (std::size_t i = 0; i < s.inner; ++i) {
              gx[(o * s.extent + e) * s.inner + i] = gd[o * s.inner + i];
            }
          }
        }
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kSumAll:
      case OpKind::kMeanAll: {
        const double scale_by = n.op == OpKind::kMeanAll ? 1.0 / static_cast<double>(in(0).size()) : 1.0;
        accumulate(n.inputs[0], std::vector<double>(in(0).size(), g[0] * scale_by));
        break;
      }
      case OpKind::kSquaredError: {
        const auto a = in(0).data();
        const auto b = in(1).data();
        std::vector<double> ga(a.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] = 2.0 * (a[i] - b[i]) * g[0];
        if (needs(1)) {
          std::vector<double> gb(ga);
          for (double& v : gb) v = -v;
          accumulate(n.inputs[1], std::move(gb));
        }
        if (needs(0)) accumulate(n.inputs[0], std::move(ga));
        break;
      }
      case OpKind::kGather: {
        std::vector<double> gx(in(0).size(), 0.0);
        const auto gd = g.data();
        for (std::size_t i = 0; i < n.index.size(); ++i) gx[n.index[i]] += gd[i];
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
      case OpKind::kReshape:
        accumulate(n.inputs[0], std::vector<double>(g.values()));
        break;
      case OpKind::kStack: {
        const Shape& part = in(0).shape();
        std::size_t outer = 1;
        for (std::size_t i = 0; i < n.axis; ++i) outer *= part[i];
        const std::size_t inner = element_count(part) / outer;
        const std::size_t count = n.inputs.size();
        const auto gd = g.data();
        for (std::size_t k = 0; k < count; ++k) {
          if (!needs(k)) continue;
          std::vector<double> gk(inner * outer);
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) gk[o * inner + i] = gd[(o * count + k) * inner + i];
          }
          accumulate(n.inputs[k], std::move(gk));
        }
        break;
      }
      case OpKind::kStandardize: {
        const std::size_t rows = n.value.dim(0);
        const std::size_t cols = n.value.dim(1);
        const auto y = n.value.data();
        const auto gd = g.data();
        std::vector<double> gx(gd.size());
        const double inv_rows = 1.0 / static_cast<double>(rows);
        for (std::size_t c = 0; c < cols; ++c) {
          const double sd = n.saved[c];
          const bool floored = n.saved[cols + c] != 0.0;
          double mean_g = 0.0;
          double mean_gy = 0.0;
          for (std::size_t r = 0; r < rows; ++r) {
            mean_g += gd[r * cols + c];
            mean_gy += gd[r * cols + c] * y[r * cols + c];
          }
          mean_g *= inv_rows;
          mean_gy *= inv_rows;
          if (floored) mean_gy = 0.0;
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t at = r * cols + c;
            gx[at] = (gd[at] - mean_g - y[at] * mean_gy) / sd;
          }
        }
        accumulate(n.inputs[0], std::move(gx));
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = common_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul", av.shape(), bv.shape());
  }
  std::vector<double> out(av.dim(0) * bv.dim(1));
  MutMap(out.data(), av.dim(0), bv.dim(1)).noalias() = as_matrix(av) * as_matrix(bv);
  return tape.record(make_node(OpKind::kMatMul, {a.id(), b.id()},
                               Tensor({av.dim(0), bv.dim(1)}, std::move(out))));
}

namespace {

template <typename F>
Var elementwise_binary(Var a, Var b, OpKind op, const char* name, F f) {
  Tape& tape = common_tape(a, b, name);
  require_same_shape(name, a, b);
  const auto x = a.value().data();
  const auto y = b.value().data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  return tape.record(make_node(op, {a.id(), b.id()}, Tensor(a.shape(), std::move(out))));
}

template <typename F>
Var elementwise_unary(Var x, OpKind op, F f) {
  const auto v = x.value().data();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(v[i]);
  return x.tape().record(make_node(op, {x.id()}, Tensor(x.shape(), std::move(out))));
}

}  // namespace

Var add(Var a, Var b) {
  return elementwise_binary(a, b, OpKind::kAdd, "add", [](double p, double q) { return p + q; });
}

Var sub(Var a, Var b) {
  return elementwise_binary(a, b, OpKind::kSub, "sub", [](double p, double q) { return p - q; });
}

Var mul(Var a, Var b) {
  return elementwise_binary(a, b, OpKind::kMul, "mul", [](double p, double q) { return p * q; });
}

Var add_bias(Var x, Var b) {
  Tape& tape = common_tape(x, b, "add_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (xv.rank() == 0 || bv.rank() != 1 || xv.shape().back() != bv.dim(0)) {
    throw ShapeError("add_bias", xv.shape(), bv.shape());
  }
  const std::size_t width = bv.size();
  std::vector<double> out(xv.values());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i % width];
  return tape.record(make_node(OpKind::kAddBias, {x.id(), b.id()}, Tensor(xv.shape(), std::move(out))));
}

Var scale(Var x, double factor) {
  std::vector<double> out(x.value().values());
  for (double& v : out) v *= factor;
  Tape::Node n = make_node(OpKind::kScale, {x.id()}, Tensor(x.shape(), std::move(out)));
  n.scalar = factor;
  return x.tape().record(std::move(n));
}

Var elu(Var x) {
  return elementwise_unary(x, OpKind::kElu, [](double v) { return v > 0.0 ? v : std::expm1(v); });
}

Var sigmoid(Var x) { return elementwise_unary(x, OpKind::kSigmoid, sigmoid_scalar); }

Var softmax(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(xv.shape()));
  }
  const AxisSplit s = split_at(xv.shape(), axis);
  const auto in = xv.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double peak = in[base];
      for (std::size_t e = 1; e < s.extent; ++e) peak = std::max(peak, in[base + e * s.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const std::size_t at = base + e * s.inner;
        out[at] = std::exp(in[at] - peak);
        total += out[at];
      }
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] /= total;
    }
  }
  Tape::Node n = make_node(OpKind::kSoftmax, {x.id()}, Tensor(xv.shape(), std::move(out)));
  n.axis = axis;
  return x.tape().record(std::move(n));
}

Var sum(Var x, std::size_t axis) {
  const Tensor& xv = x.value();
  if (axis >= xv.rank()) {
    throw ShapeError("sum: axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(xv.shape()));
  }
  const AxisSplit s = split_at(xv.shape(), axis);
  const auto in = xv.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += in[(o * s.extent + e) * s.inner + i];
    }
  }
  Shape shape = xv.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tape::Node n = make_node(OpKind::kSumAxis, {x.id()}, Tensor(std::move(shape), std::move(out)));
  n.axis = axis;
  return x.tape().record(std::move(n));
}

Var sum_all(Var x) {
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return x.tape().record(make_node(OpKind::kSumAll, {x.id()}, Tensor::scalar(total)));
}

Var mean_all(Var x) {
  if (x.value().size() == 0) throw ShapeError("mean_all of an empty tensor");
  double total = 0.0;
  for (double v : x.value().data()) total += v;
  return x.tape().record(make_node(OpKind::kMeanAll, {x.id()},
                                   Tensor::scalar(total / static_cast<double>(x.value().size()))));
}

Var squared_error(Var a, Var b) {
  Tape& tape = common_tape(a, b, "squared_error");
  require_same_shape("squared_error", a, b);
  const auto x = a.value().data();
  const auto y = b.value().data();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    total += d * d;
  }
  return tape.record(make_node(OpKind::kSquaredError, {a.id(), b.id()}, Tensor::scalar(total)));
}

Var gather(Var x, std::vector<std::size_t> index, Shape shape) {
  const Tensor& xv = x.value();
  if (element_count(shape) != index.size()) {
    throw ShapeError("gather: index of length " + std::to_string(index.size()) +
                     " does not fill shape " + to_string(shape));
  }
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.size()) {
      throw ShapeError("gather: index " + std::to_string(index[i]) + " out of range for shape " +
                       to_string(xv.shape()));
    }
    out[i] = xv[index[i]];
  }
  Tape::Node n = make_node(OpKind::kGather, {x.id()}, Tensor(std::move(shape), std::move(out)));
  n.index = std::move(index);
  return x.tape().record(std::move(n));
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape().record(make_node(OpKind::kReshape, {x.id()}, std::move(out)));
}

Var stack(std::span<const Var> xs, std::size_t axis) {
  if (xs.empty()) throw ShapeError("stack of zero tensors");
  const Shape& part = xs[0].shape();
  if (axis > part.size()) {
    throw ShapeError("stack: axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(part));
  }
  std::vector<std::size_t> ids;
  for (const Var& v : xs) {
    common_tape(xs[0], v, "stack");
    if (v.shape() != part) throw ShapeError("stack", part, v.shape());
    ids.push_back(v.id());
  }
  std::size_t outer = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= part[i];
  const std::size_t inner = element_count(part) / outer;
  const std::size_t count = xs.size();
  std::vector<double> out(outer * count * inner);
  for (std::size_t k = 0; k < count; ++k) {
    const auto src = xs[k].value().data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * inner), inner,
                  out.begin() + static_cast<std::ptrdiff_t>((o * count + k) * inner));
    }
  }
  Shape shape = part;
  shape.insert(shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  Tape::Node n = make_node(OpKind::kStack, std::move(ids), Tensor(std::move(shape), std::move(out)));
  n.axis = axis;
  return xs[0].tape().record(std::move(n));
}

Var standardize(Var x, double std_floor) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.dim(0) == 0) {
    throw ShapeError("standardize expects a non-empty [rows, cols] matrix, got " + to_string(xv.shape()));
  }
  const std::size_t rows = xv.dim(0);
  const std::size_t cols = xv.dim(1);
  std::vector<double> saved(2 * cols, 0.0);
  std::vector<double> out(xv.size());
  for (std::size_t c = 0; c < cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += xv[r * cols + c];
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = xv[r * cols + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(rows);
    double sd = std::sqrt(var);
    if (sd < std_floor) {
      sd = std_floor;
      saved[cols + c] = 1.0;
    }
    saved[c] = sd;
    for (std::size_t r = 0; r < rows; ++r) out[r * cols + c] = (xv[r * cols + c] - mean) / sd;
  }
  Tape::Node n = make_node(OpKind::kStandardize, {x.id()}, Tensor(xv.shape(), std::move(out)));
  n.scalar = std_floor;
  n.saved = std::move(saved);
  return x.tape().record(std::move(n));
}

}  // namespace cgl
