#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cgl/tensor.hpp"

namespace cgl {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid as long as the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kAddBias,
  kScale,
  kElu,
  kSigmoid,
  kSoftmax,
  kSumAxis,
  kSumAll,
  kMeanAll,
  kSquaredError,
  kGather,
  kReshape,
  kStack,
  kStandardize,
};

const char* op_name(OpKind op);

/// Define-by-run record of primitive ops for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so inputs always precede their
/// consumers and the backward sweep is a plain reverse scan. Values are never
/// mutated after recording.
class Tape {
 public:
  struct Node {
    OpKind op = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    // Op-specific payload.
    std::size_t axis = 0;
    double scalar = 0.0;
    std::vector<std::size_t> index;
    std::vector<double> saved;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }

  /// Gradient of the last backward() loss w.r.t. `v`; zeros when `v` was not reached.
  const Tensor& grad(Var v) const;

  /// Reverse sweep from a scalar loss. Gradients from any previous sweep are discarded.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }

  Var record(Node node);

 private:
  void accumulate(std::size_t id, const Tensor& g);
  void accumulate(std::size_t id, std::vector<double>&& g);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  mutable Tensor zero_grad_;
};

// ---------------------------------------------------------------------------
// Primitives. All throw ShapeError on non-conforming operands.

/// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x[..., n] + b[n], broadcast over leading dims.
Var add_bias(Var x, Var b);
Var scale(Var x, double factor);
/// ELU with alpha = 1.
Var elu(Var x);
Var sigmoid(Var x);
Var softmax(Var x, std::size_t axis);
Var sum(Var x, std::size_t axis);
Var sum_all(Var x);
Var mean_all(Var x);
/// Scalar sum of (a - b)^2.
Var squared_error(Var a, Var b);
/// out.flat[i] = x.flat[index[i]], reshaped to `shape`.
Var gather(Var x, std::vector<std::size_t> index, Shape shape);
Var reshape(Var x, Shape shape);
/// Stacks equally shaped tensors along a new axis.
Var stack(std::span<const Var> xs, std::size_t axis);
/// Column-wise z-score of a [rows, cols] matrix with population std floored at `std_floor`.
Var standardize(Var x, double std_floor);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var x) { return scale(x, s); }

}  // namespace cgl
