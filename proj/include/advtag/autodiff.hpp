#pragma once

// Define-by-run reverse-mode differentiation over dense double tensors.
//
// A Tape records primitive applications in execution order. Leaves are
// either parameters (borrowed, must outlive the tape) or inputs (owned).
// backward() walks the record once in reverse and returns the gradient of a
// scalar root with respect to every leaf.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "advtag/tensor.hpp"

namespace advtag {

class Tape;

// Raised when a forward value or gradient check meets NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class LeafKind { kNone, kParameter, kInput };

enum class Op {
  kLeaf,
  kConstant,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kConcat,
  kStack,
  kSlice,
  kRow,
  kTranspose,
  kSigmoid,
  kTanh,
  kSoftplus,
  kLogSumExp,
  kMax,
  kDropout,
  kGather,
  kSum,
};

const char* op_name(Op op);

// Gradients of one backward pass, indexed by node.
class GradientMap {
 public:
  GradientMap() = default;
  explicit GradientMap(std::vector<Tensor> grads) : grads_(std::move(grads)) {}

  // Gradient w.r.t. a leaf (zeros if the leaf did not reach the root).
  const Tensor& operator[](Var v) const;
  const Tensor& at(std::size_t id) const;

 private:
  std::vector<Tensor> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Parameter leaf referencing an external tensor. The tensor must not be
  // modified or destroyed while the tape is alive.
  Var parameter(const Tensor& value);
  // Input leaf owning its value.
  Var input(Tensor value);
  // Non-differentiable value.
  Var constant(Tensor value);

  const Tensor& value(std::size_t id) const;
  std::size_t size() const { return nodes_.size(); }
  LeafKind leaf_kind(Var v) const { return nodes_.at(v.id()).leaf; }

  // Vector-Jacobian products from `root` (which must hold one element),
  // seeded with `seed`.
  GradientMap backward(Var root, double seed = 1.0) const;

 private:
  friend class TapeBuilder;

  struct Node {
    Op op = Op::kLeaf;
    LeafKind leaf = LeafKind::kNone;
    std::vector<std::size_t> inputs;
    Tensor value;
    const Tensor* borrowed = nullptr;
    Tensor aux;                     // dropout mask
    std::vector<std::size_t> ints;  // axis / offsets / argmax indices
    double scalar = 0.0;            // scale factor
  };

  Var push(Node node);
  void accumulate_vjp(const Node& node, const Tensor& grad,
                      std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
};

// Primitives. Operands must live on the same tape.

// (m x k)(k x n) -> (m x n), or (m x k)(k) -> (m).
Var matmul(Var a, Var b);
// Same shape, or matrix (m x n) + row vector (n) added to every row.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// Rank-1 concatenation.
Var concat(std::span<const Var> parts);
// Equal-length rank-1 vectors -> matrix with one row per vector.
Var stack(std::span<const Var> rows);
// Rank-1 slice [begin, begin + length).
Var slice(Var a, std::size_t begin, std::size_t length);
// Row r of a matrix as a vector.
Var row(Var a, std::size_t r);
Var transpose(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);
// Rank 1: reduces to a one-element tensor. Rank 2: axis 0 reduces rows
// (result has one entry per column), axis 1 reduces columns.
Var logsumexp(Var a, std::size_t axis = 0);
// Same reduction convention as logsumexp; ties route to the lowest index.
Var max(Var a, std::size_t axis = 0);
// Elementwise product with a fixed mask (inverted-dropout scaling is up to
// whoever builds the mask).
Var dropout(Var a, const Tensor& mask);
// Row `id` of a matrix leaf.
Var gather(Var table, std::size_t id);
Var sum(Var a);

// Scalar element (r, c) of a matrix, built from row + slice.
Var element(Var matrix, std::size_t r, std::size_t c);

using TapeFunction = std::function<Var(Tape&, std::span<const Var>)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar-valued function of several input tensors.
double grad_check(const TapeFunction& f, std::span<const Tensor> point,
                  double step);
double grad_check(const std::function<Var(Var)>& f, const Tensor& point,
                  double step);

}  // namespace advtag
