#include "advtag/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace advtag {

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConstant: return "constant";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kConcat: return "concat";
    case Op::kStack: return "stack";
    case Op::kSlice: return "slice";
    case Op::kRow: return "row";
    case Op::kTranspose: return "transpose";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kSoftplus: return "softplus";
    case Op::kLogSumExp: return "logsumexp";
    case Op::kMax: return "max";
    case Op::kDropout: return "dropout";
    case Op::kGather: return "gather";
    case Op::kSum: return "sum";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_->value(id_); }

const Tensor& GradientMap::operator[](Var v) const { return at(v.id()); }

const Tensor& GradientMap::at(std::size_t id) const {
  if (id >= grads_.size()) throw std::out_of_range("GradientMap: unknown node");
  return grads_[id];
}

// Access point for the free primitive functions.
class TapeBuilder {
 public:
  using Node = Tape::Node;

  static Tape& tape_of(Var a, Var b, const char* prim) {
    if (a.tape() == nullptr || a.tape() != b.tape()) {
      throw std::invalid_argument(std::string(prim) +
                                  ": operands live on different tapes");
    }
    return *a.tape();
  }

  static Var push(Tape& tape, Node node) { return tape.push(std::move(node)); }
};

namespace {

using Node = TapeBuilder::Node;

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

Var unary(Var a, Op op, Tensor value) {
  Node node;
  node.op = op;
  node.inputs = {a.id()};
  node.value = std::move(value);
  return TapeBuilder::push(*a.tape(), std::move(node));
}

template <typename Fn>
Tensor map_values(const Tensor& in, Fn fn) {
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  return out;
}

// Reduction layout: for each output index o, the input indices are
// base(o) + j * stride for j in [0, count).
struct Reduction {
  std::size_t outputs;
  std::size_t count;
  std::size_t stride;
  std::size_t outer_step;  // base(o) = o * outer_step
  Shape out_shape;
};

Reduction reduction_for(const Tensor& t, std::size_t axis, const char* prim) {
  if (t.rank() == 1) {
    if (axis != 0) throw ShapeError(prim, t.shape(), Shape{axis});
    return {1, t.size(), 1, 0, Shape{1}};
  }
  if (t.rank() != 2 || axis > 1) throw ShapeError(prim, t.shape(), Shape{axis});
  const std::size_t r = t.rows();
  const std::size_t c = t.cols();
  if (axis == 0) return {c, r, c, 1, Shape{c}};
  return {r, c, 1, c, Shape{r}};
}

}  // namespace

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Tensor& value) {
  Node node;
  node.op = Op::kLeaf;
  node.leaf = LeafKind::kParameter;
  node.borrowed = &value;
  return push(std::move(node));
}

Var Tape::input(Tensor value) {
  Node node;
  node.op = Op::kLeaf;
  node.leaf = LeafKind::kInput;
  node.value = std::move(value);
  return push(std::move(node));
}

Var Tape::constant(Tensor value) {
  Node node;
  node.op = Op::kConstant;
  node.value = std::move(value);
  return push(std::move(node));
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& node = nodes_.at(id);
  return node.borrowed != nullptr ? *node.borrowed : node.value;
}

Var matmul(Var a, Var b) {
  Tape& tape = TapeBuilder::tape_of(a, b, "matmul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.rank() != 2 || (y.rank() != 1 && y.rank() != 2) ||
      x.cols() != y.shape()[0]) {
    throw ShapeError("matmul", x.shape(), y.shape());
  }
  const std::size_t m = x.rows();
  const std::size_t k = x.cols();
  Node node;
  node.op = Op::kMatmul;
  node.inputs = {a.id(), b.id()};
  if (y.rank() == 1) {
    Tensor out({m});
    for (std::size_t i = 0; i < m; ++i) {
      const double* xr = x.data().data() + i * k;
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += xr[j] * y[j];
      out[i] = s;
    }
    node.value = std::move(out);
  } else {
    const std::size_t n = y.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        const double xij = x.at(i, j);
        if (xij == 0.0) continue;
        const double* yr = y.data().data() + j * n;
        double* orow = out.data().data() + i * n;
        for (std::size_t c = 0; c < n; ++c) orow[c] += xij * yr[c];
      }
    }
    node.value = std::move(out);
  }
  return TapeBuilder::push(tape, std::move(node));
}

Var add(Var a, Var b) {
  Tape& tape = TapeBuilder::tape_of(a, b, "add");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Node node;
  node.op = Op::kAdd;
  node.inputs = {a.id(), b.id()};
  if (x.shape() == y.shape()) {
    Tensor out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
    node.value = std::move(out);
  } else if (x.rank() == 2 && y.rank() == 1 && x.cols() == y.size()) {
    Tensor out = x;
    const std::size_t n = x.cols();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i % n];
    node.value = std::move(out);
  } else {
    throw ShapeError("add", x.shape(), y.shape());
  }
  return TapeBuilder::push(tape, std::move(node));
}

Var sub(Var a, Var b) {
  Tape& tape = TapeBuilder::tape_of(a, b, "sub");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) throw ShapeError("sub", x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  Node node;
  node.op = Op::kSub;
  node.inputs = {a.id(), b.id()};
  node.value = std::move(out);
  return TapeBuilder::push(tape, std::move(node));
}

Var mul(Var a, Var b) {
  Tape& tape = TapeBuilder::tape_of(a, b, "mul");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (x.shape() != y.shape()) throw ShapeError("mul", x.shape(), y.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  Node node;
  node.op = Op::kMul;
  node.inputs = {a.id(), b.id()};
  node.value = std::move(out);
  return TapeBuilder::push(tape, std::move(node));
}

Var scale(Var a, double factor) {
  Node node;
  node.op = Op::kScale;
  node.inputs = {a.id()};
  node.scalar = factor;
  node.value = map_values(a.value(), [factor](double x) { return factor * x; });
  return TapeBuilder::push(*a.tape(), std::move(node));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  Tape& tape = *parts.front().tape();
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw std::invalid_argument("concat: mixed tapes");
    if (p.value().rank() != 1) {
      throw ShapeError("concat", parts.front().shape(), p.shape());
    }
    total += p.value().size();
  }
  Node node;
  node.op = Op::kConcat;
  Tensor out({total});
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + offset);
    offset += v.size();
    node.inputs.push_back(p.id());
  }
  node.value = std::move(out);
  return TapeBuilder::push(tape, std::move(node));
}

Var stack(std::span<const Var> rows) {
  if (rows.empty()) throw std::invalid_argument("stack: no operands");
  Tape& tape = *rows.front().tape();
  const Shape& first = rows.front().shape();
  if (first.size() != 1) throw ShapeError("stack", first, first);
  const std::size_t n = first[0];
  Node node;
  node.op = Op::kStack;
  Tensor out({rows.size(), n});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Var& v = rows[r];
    if (v.tape() != &tape) throw std::invalid_argument("stack: mixed tapes");
    if (v.shape() != first) throw ShapeError("stack", first, v.shape());
    std::copy(v.value().data().begin(), v.value().data().end(),
              out.data().begin() + r * n);
    node.inputs.push_back(v.id());
  }
  node.value = std::move(out);
  return TapeBuilder::push(tape, std::move(node));
}

Var slice(Var a, std::size_t begin, std::size_t length) {
  const Tensor& x = a.value();
  if (x.rank() != 1 || begin + length > x.size() || length == 0) {
    throw ShapeError("slice", x.shape(), Shape{begin, length});
  }
  Tensor out({length});
  std::copy_n(x.data().begin() + begin, length, out.data().begin());
  Node node;
  node.op = Op::kSlice;
  node.inputs = {a.id()};
  node.ints = {begin};
  node.value = std::move(out);
  return TapeBuilder::push(*a.tape(), std::move(node));
}

Var row(Var a, std::size_t r) {
  const Tensor& x = a.value();
  if (x.rank() != 2 || r >= x.rows()) {
    throw ShapeError("row", x.shape(), Shape{r});
  }
  Tensor out({x.cols()});
  std::copy(x.row(r).begin(), x.row(r).end(), out.data().begin());
  Node node;
  node.op = Op::kRow;
  node.inputs = {a.id()};
  node.ints = {r};
  node.value = std::move(out);
  return TapeBuilder::push(*a.tape(), std::move(node));
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  if (x.rank() != 2) throw ShapeError("transpose", x.shape(), x.shape());
  Tensor out({x.cols(), x.rows()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out.at(j, i) = x.at(i, j);
  }
  return unary(a, Op::kTranspose, std::move(out));
}

Var sigmoid(Var a) {
  return unary(a, Op::kSigmoid, map_values(a.value(), stable_sigmoid));
}

Var tanh(Var a) {
  return unary(a, Op::kTanh,
               map_values(a.value(), [](double x) { return std::tanh(x); }));
}

Var softplus(Var a) {
  return unary(a, Op::kSoftplus, map_values(a.value(), stable_softplus));
}

Var logsumexp(Var a, std::size_t axis) {
  const Tensor& x = a.value();
  const Reduction red = reduction_for(x, axis, "logsumexp");
  Tensor out(red.out_shape);
  for (std::size_t o = 0; o < red.outputs; ++o) {
    const std::size_t base = o * red.outer_step;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < red.count; ++j) {
      m = std::max(m, x[base + j * red.stride]);
    }
    if (!std::isfinite(m)) {
      out[o] = m;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < red.count; ++j) {
      s += std::exp(x[base + j * red.stride] - m);
    }
    out[o] = m + std::log(s);
  }
  Node node;
  node.op = Op::kLogSumExp;
  node.inputs = {a.id()};
  node.ints = {axis};
  node.value = std::move(out);
  return TapeBuilder::push(*a.tape(), std::move(node));
}

Var max(Var a, std::size_t axis) {
  const Tensor& x = a.value();
  const Reduction red = reduction_for(x, axis, "max");
  Tensor out(red.out_shape);
  std::vector<std::size_t> argmax(red.outputs);
  for (std::size_t o = 0; o < red.outputs; ++o) {
    const std::size_t base = o * red.outer_step;
    std::size_t best = base;
    for (std::size_t j = 1; j < red.count; ++j) {
      const std::size_t idx = base + j * red.stride;
      if (x[idx] > x[best]) best = idx;
    }
    out[o] = x[best];
    argmax[o] = best;
  }
  Node node;
  node.op = Op::kMax;
  node.inputs = {a.id()};
  node.ints = std::move(argmax);
  node.value = std::move(out);
  return TapeBuilder::push(*a.tape(), std::move(node));
}

Var dropout(Var a, const Tensor& mask) {
  const Tensor& x = a.value();
  if (mask.shape() != x.shape()) throw ShapeError("dropout", x.shape(), mask.shape());
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  Node node;
  node.op = Op::kDropout;
  node.inputs = {a.id()};
  node.aux = mask;
  node.value = std::move(out);
  return TapeBuilder::push(*a.tape(), std::move(node));
}

Var gather(Var table, std::size_t id) {
  const Tensor& t = table.value();
  if (t.rank() != 2 || id >= t.rows()) {
    throw ShapeError("gather", t.shape(), Shape{id});
  }
  Tensor out({t.cols()});
  std::copy(t.row(id).begin(), t.row(id).end(), out.data().begin());
  Node node;
  node.op = Op::kGather;
  node.inputs = {table.id()};
  node.ints = {id};
  node.value = std::move(out);
  return TapeBuilder::push(*table.tape(), std::move(node));
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return unary(a, Op::kSum, Tensor::scalar(s));
}

Var element(Var matrix, std::size_t r, std::size_t c) {
  return slice(row(matrix, r), c, 1);
}

GradientMap Tape::backward(Var root, double seed) const {
  if (root.tape() != this) throw std::invalid_argument("backward: foreign root");
  const Tensor& rv = value(root.id());
  if (rv.size() != 1) throw ShapeError("backward", rv.shape(), Shape{1});

  std::vector<Tensor> grads(nodes_.size());
  grads[root.id()] = Tensor(rv.shape(), seed);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    if (grads[i].size() == 0) continue;
    const Node& node = nodes_[i];
    if (node.op == Op::kLeaf || node.op == Op::kConstant) continue;
    accumulate_vjp(node, grads[i], grads);
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::kLeaf && grads[i].size() == 0) {
      grads[i] = Tensor(value(i).shape());
    }
  }
  return GradientMap(std::move(grads));
}

void Tape::accumulate_vjp(const Node& node, const Tensor& g,
                          std::vector<Tensor>& grads) const {
  auto slot = [&](std::size_t id) -> Tensor& {
    Tensor& t = grads[id];
    if (t.size() == 0) t = Tensor(value(id).shape());
    return t;
  };
  auto is_const = [&](std::size_t id) {
    return nodes_[id].op == Op::kConstant;
  };

  const Tensor& y = node.value;
  switch (node.op) {
    case Op::kLeaf:
    case Op::kConstant:
      return;
    case Op::kMatmul: {
      const std::size_t ia = node.inputs[0];
      const std::size_t ib = node.inputs[1];
      const Tensor& a = value(ia);
      const Tensor& b = value(ib);
      const std::size_t m = a.rows();
      const std::size_t k = a.cols();
      if (b.rank() == 1) {
        if (!is_const(ia)) {
          Tensor& ga = slot(ia);
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            if (gi == 0.0) continue;
            double* row = ga.data().data() + i * k;
            for (std::size_t j = 0; j < k; ++j) row[j] += gi * b[j];
          }
        }
        if (!is_const(ib)) {
          Tensor& gb = slot(ib);
          for (std::size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            if (gi == 0.0) continue;
            const double* row = a.data().data() + i * k;
            for (std::size_t j = 0; j < k; ++j) gb[j] += row[j] * gi;
          }
        }
      } else {
        const std::size_t n = b.cols();
        if (!is_const(ia)) {
          Tensor& ga = slot(ia);  // dA = dC B^T
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
              double s = 0.0;
              for (std::size_t c = 0; c < n; ++c) s += g.at(i, c) * b.at(j, c);
              ga.at(i, j) += s;
            }
          }
        }
        if (!is_const(ib)) {
          Tensor& gb = slot(ib);  // dB = A^T dC
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
              const double aij = a.at(i, j);
              if (aij == 0.0) continue;
              for (std::size_t c = 0; c < n; ++c) gb.at(j, c) += aij * g.at(i, c);
            }
          }
        }
      }
      return;
    }
    case Op::kAdd: {
      const std::size_t ia = node.inputs[0];
      const std::size_t ib = node.inputs[1];
      if (!is_const(ia)) slot(ia).axpy(1.0, g);
      if (!is_const(ib)) {
        Tensor& gb = slot(ib);
        if (gb.shape() == g.shape()) {
          gb.axpy(1.0, g);
        } else {
          const std::size_t n = gb.size();
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
        }
      }
      return;
    }
    case Op::kSub: {
      if (!is_const(node.inputs[0])) slot(node.inputs[0]).axpy(1.0, g);
      if (!is_const(node.inputs[1])) slot(node.inputs[1]).axpy(-1.0, g);
      return;
    }
    case Op::kMul: {
      const std::size_t ia = node.inputs[0];
      const std::size_t ib = node.inputs[1];
      const Tensor& a = value(ia);
      const Tensor& b = value(ib);
      if (!is_const(ia)) {
        Tensor& ga = slot(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (!is_const(ib)) {
        Tensor& gb = slot(ib);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      return;
    }
    case Op::kScale: {
      slot(node.inputs[0]).axpy(node.scalar, g);
      return;
    }
    case Op::kConcat: {
      std::size_t offset = 0;
      for (std::size_t id : node.inputs) {
        const std::size_t len = value(id).size();
        if (!is_const(id)) {
          Tensor& gi = slot(id);
          for (std::size_t j = 0; j < len; ++j) gi[j] += g[offset + j];
        }
        offset += len;
      }
      return;
    }
    case Op::kStack: {
      const std::size_t n = y.cols();
      for (std::size_t r = 0; r < node.inputs.size(); ++r) {
        const std::size_t id = node.inputs[r];
        if (is_const(id)) continue;
        Tensor& gi = slot(id);
        for (std::size_t j = 0; j < n; ++j) gi[j] += g.at(r, j);
      }
      return;
    }
    case Op::kSlice: {
      Tensor& gi = slot(node.inputs[0]);
      const std::size_t begin = node.ints[0];
      for (std::size_t j = 0; j < g.size(); ++j) gi[begin + j] += g[j];
      return;
    }
    case Op::kRow:
    case Op::kGather: {
      Tensor& gi = slot(node.inputs[0]);
      auto dst = gi.row(node.ints[0]);
      for (std::size_t j = 0; j < g.size(); ++j) dst[j] += g[j];
      return;
    }
    case Op::kTranspose: {
      Tensor& gi = slot(node.inputs[0]);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) gi.at(j, i) += g.at(i, j);
      }
      return;
    }
    case Op::kSigmoid: {
      Tensor& gi = slot(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * y[i] * (1.0 - y[i]);
      return;
    }
    case Op::kTanh: {
      Tensor& gi = slot(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * (1.0 - y[i] * y[i]);
      return;
    }
    case Op::kSoftplus: {
      const Tensor& x = value(node.inputs[0]);
      Tensor& gi = slot(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * stable_sigmoid(x[i]);
      return;
    }
    case Op::kLogSumExp: {
      const Tensor& x = value(node.inputs[0]);
      Tensor& gi = slot(node.inputs[0]);
      const std::size_t axis = node.ints[0];
      const Reduction red = reduction_for(x, axis, "logsumexp");
      for (std::size_t o = 0; o < red.outputs; ++o) {
        if (!std::isfinite(y[o])) continue;
        const std::size_t base = o * red.outer_step;
        for (std::size_t j = 0; j < red.count; ++j) {
          const std::size_t idx = base + j * red.stride;
          gi[idx] += g[o] * std::exp(x[idx] - y[o]);
        }
      }
      return;
    }
    case Op::kMax: {
      Tensor& gi = slot(node.inputs[0]);
      for (std::size_t o = 0; o < node.ints.size(); ++o) gi[node.ints[o]] += g[o];
      return;
    }
    case Op::kDropout: {
      Tensor& gi = slot(node.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * node.aux[i];
      return;
    }
    case Op::kSum: {
      Tensor& gi = slot(node.inputs[0]);
      const double s = g[0];
      for (double& v : gi.data()) v += s;
      return;
    }
  }
}

double grad_check(const TapeFunction& f, std::span<const Tensor> point,
                  double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be > 0");

  auto evaluate = [&](std::span<const Tensor> at) {
    Tape tape;
    std::vector<Var> leaves;
    leaves.reserve(at.size());
    for (const Tensor& t : at) leaves.push_back(tape.input(t));
    const double v = f(tape, leaves).value().item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
    return v;
  };

  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor& t : point) leaves.push_back(tape.input(t));
  const Var root = f(tape, leaves);
  if (!root.value().all_finite()) throw NumericError("grad_check: non-finite output");
  const GradientMap grads = tape.backward(root);

  std::vector<Tensor> probe(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t p = 0; p < probe.size(); ++p) {
    const Tensor& analytic = grads[leaves[p]];
    if (!analytic.all_finite()) throw NumericError("grad_check: non-finite gradient");
    for (std::size_t i = 0; i < probe[p].size(); ++i) {
      const double orig = probe[p][i];
      probe[p][i] = orig + step;
      const double up = evaluate(probe);
      probe[p][i] = orig - step;
      const double down = evaluate(probe);
      probe[p][i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double err =
          std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

double grad_check(const std::function<Var(Var)>& f, const Tensor& point,
                  double step) {
  const TapeFunction wrapped = [&f](Tape&, std::span<const Var> xs) {
    return f(xs[0]);
  };
  return grad_check(wrapped, std::span<const Tensor>(&point, 1), step);
}

}  // namespace advtag
