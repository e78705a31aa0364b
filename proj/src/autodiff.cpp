//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/autodiff.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/Dense>

namespace msde {
namespace {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>;
  using MapMat = Eigen::Map<RowMat>;
  using ConstMapMat = Eigen::Map<const RowMat>;

  ConstMapMat as_mat(const Array &a) {
    return ConstMapMat(a.data(), a.rows(), a.cols());
  }

  MapMat as_mat(Array &a) { return MapMat(a.data(), a.rows(), a.cols()); }

  [[noreturn]] void shape_fail(const char *op, const Shape &a,
                               const Shape &b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a)
                     + " and " + shape_str(b));
  }

  void require_rank2(const char *op, const Array &a) {
    if (a.rank() != 2)
      throw ShapeError(std::string(op) + ": expected rank-2 array, got "
                       + shape_str(a.shape()));
  }

  Shape broadcast_shape(const char *op, const Shape &a, const Shape &b) {
    if (a == b)
      return a;
    if (a.size() != 2 || b.size() != 2)
      shape_fail(op, a, b);
    Shape out(2);
    for (int k = 0; k < 2; ++k) {
      if (a[k] == b[k] || b[k] == 1)
        out[k] = a[k];
      else if (a[k] == 1)
        out[k] = b[k];
      else
        shape_fail(op, a, b);
    }
    return out;
  }

  // Elementwise binary op with rank-2 broadcasting.
  template <class F>
  void binary_apply(const Array &a, const Array &b, Array &out, F &&f) {
    if (a.shape() == b.shape()) {
      const double *pa = a.data(), *pb = b.data();
      double *po = out.data();
      for (int64_t i = 0; i < out.size(); ++i)
        po[i] = f(pa[i], pb[i]);
      return;
    }
    const int64_t rows = out.rows(), cols = out.cols();
    const bool ar = a.rows() == 1, ac = a.cols() == 1;
    const bool br = b.rows() == 1, bc = b.cols() == 1;
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t c = 0; c < cols; ++c) {
        const double va = a(ar ? 0 : r, ac ? 0 : c);
        const double vb = b(br ? 0 : r, bc ? 0 : c);
        out(r, c) = f(va, vb);
      }
    }
  }

  // Accumulates `full` (shape of the broadcast result) into `dst`, reducing
  // over broadcast axes.
  void accumulate_reduced(const Array &full, Array &dst, double sign = 1.0) {
    if (full.shape() == dst.shape()) {
      double *pd = dst.data();
      const double *pf = full.data();
      for (int64_t i = 0; i < dst.size(); ++i)
        pd[i] += sign * pf[i];
      return;
    }
    const bool rr = dst.rows() == 1, rc = dst.cols() == 1;
    for (int64_t r = 0; r < full.rows(); ++r)
      for (int64_t c = 0; c < full.cols(); ++c)
        dst(rr ? 0 : r, rc ? 0 : c) += sign * full(r, c);
  }

  double softplus_scalar(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }

  double sigmoid_scalar(double x) {
    if (x >= 0)
      return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  }
} // namespace

const char *op_name(OpKind kind) {
  switch (kind) {
  case OpKind::kInput:
    return "input";
  case OpKind::kConstant:
    return "constant";
  case OpKind::kAdd:
    return "add";
  case OpKind::kSub:
    return "sub";
  case OpKind::kMul:
    return "mul";
  case OpKind::kDiv:
    return "div";
  case OpKind::kMatMul:
    return "matmul";
  case OpKind::kTranspose:
    return "transpose";
  case OpKind::kReshape:
    return "reshape";
  case OpKind::kBroadcast:
    return "broadcast";
  case OpKind::kSum:
    return "sum";
  case OpKind::kMean:
    return "mean";
  case OpKind::kSumRows:
    return "sum_rows";
  case OpKind::kSumCols:
    return "sum_cols";
  case OpKind::kConcatCols:
    return "concat_cols";
  case OpKind::kConcatRows:
    return "concat_rows";
  case OpKind::kSliceCols:
    return "slice_cols";
  case OpKind::kGatherRows:
    return "gather_rows";
  case OpKind::kScatterAddRows:
    return "scatter_add_rows";
  case OpKind::kRelu:
    return "relu";
  case OpKind::kTanh:
    return "tanh";
  case OpKind::kSigmoid:
    return "sigmoid";
  case OpKind::kSoftplus:
    return "softplus";
  case OpKind::kExp:
    return "exp";
  case OpKind::kLog:
    return "log";
  case OpKind::kNeg:
    return "neg";
  case OpKind::kScale:
    return "scale";
  case OpKind::kSquare:
    return "square";
  }
  return "?";
}

IndexList make_index(std::vector<int64_t> idx) {
  return std::make_shared<const std::vector<int64_t>>(std::move(idx));
}

const Array &Var::value() const {
  return graph->value(*this);
}

void DiffGraph::check_var(Var v) const {
  if (v.graph != this || v.id < 0 || v.id >= size())
    throw Error("variable does not belong to this graph");
}

Var DiffGraph::push(Node node) {
  for (int p: node.parents)
    check_var(Var { this, p });
  compute(node);
  nodes_.push_back(std::move(node));
  return Var { this, size() - 1 };
}

Var DiffGraph::input(const std::string &name, Array value) {
  if (inputs_.contains(name))
    throw Error("duplicate graph input '" + name + "'");
  Node node { .kind = OpKind::kInput };
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  inputs_.emplace(name, size() - 1);
  return Var { this, size() - 1 };
}

Var DiffGraph::constant(Array value) {
  Node node { .kind = OpKind::kConstant };
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var { this, size() - 1 };
}

Var DiffGraph::input_var(const std::string &name) const {
  auto it = inputs_.find(name);
  if (it == inputs_.end())
    throw Error("unknown graph input '" + name + "'");
  return Var { const_cast<DiffGraph *>(this), it->second };
}

std::vector<std::string> DiffGraph::input_names() const {
  std::vector<std::string> names;
  names.reserve(inputs_.size());
  for (const auto &[name, _]: inputs_)
    names.push_back(name);
  std::sort(names.begin(), names.end());
  return names;
}

#define MSDE_UNARY(fn, k)                                                      \
  Var DiffGraph::fn(Var a) {                                                   \
    return push(Node { .kind = OpKind::k, .parents = { a.id } });             \
  }

MSDE_UNARY(transpose, kTranspose)
MSDE_UNARY(sum, kSum)
MSDE_UNARY(mean, kMean)
MSDE_UNARY(sum_rows, kSumRows)
MSDE_UNARY(sum_cols, kSumCols)
MSDE_UNARY(relu, kRelu)
MSDE_UNARY(tanh, kTanh)
MSDE_UNARY(sigmoid, kSigmoid)
MSDE_UNARY(softplus, kSoftplus)
MSDE_UNARY(exp, kExp)
MSDE_UNARY(log, kLog)
MSDE_UNARY(neg, kNeg)
MSDE_UNARY(square, kSquare)

#undef MSDE_UNARY

#define MSDE_BINARY(fn, k)                                                     \
  Var DiffGraph::fn(Var a, Var b) {                                            \
    return push(Node { .kind = OpKind::k, .parents = { a.id, b.id } });       \
  }

MSDE_BINARY(add, kAdd)
MSDE_BINARY(sub, kSub)
MSDE_BINARY(mul, kMul)
MSDE_BINARY(div, kDiv)
MSDE_BINARY(matmul, kMatMul)

#undef MSDE_BINARY

Var DiffGraph::reshape(Var a, Shape shape) {
  return push(Node { .kind = OpKind::kReshape,
                     .parents = { a.id },
                     .target = std::move(shape) });
}

Var DiffGraph::broadcast(Var a, Shape shape) {
  return push(Node { .kind = OpKind::kBroadcast,
                     .parents = { a.id },
                     .target = std::move(shape) });
}

Var DiffGraph::concat_cols(std::span<const Var> parts) {
  Node node { .kind = OpKind::kConcatCols };
  for (Var v: parts)
    node.parents.push_back(v.id);
  return push(std::move(node));
}

Var DiffGraph::concat_rows(std::span<const Var> parts) {
  Node node { .kind = OpKind::kConcatRows };
  for (Var v: parts)
    node.parents.push_back(v.id);
  return push(std::move(node));
}

Var DiffGraph::slice_cols(Var a, int64_t start, int64_t len) {
  return push(Node { .kind = OpKind::kSliceCols,
                     .parents = { a.id },
                     .start = start,
                     .len = len });
}

Var DiffGraph::gather_rows(Var a, IndexList idx) {
  return push(Node { .kind = OpKind::kGatherRows,
                     .parents = { a.id },
                     .index = std::move(idx) });
}

Var DiffGraph::scatter_add_rows(Var a, IndexList idx, int64_t out_rows) {
  return push(Node { .kind = OpKind::kScatterAddRows,
                     .parents = { a.id },
                     .len = out_rows,
                     .index = std::move(idx) });
}

Var DiffGraph::scale(Var a, double c) {
  return push(
      Node { .kind = OpKind::kScale, .parents = { a.id }, .scalar = c });
}

void DiffGraph::compute(Node &node) const {
  auto in = [&](int k) -> const Array & {
    return nodes_[node.parents[k]].value;
  };

  auto unary = [&](auto &&f) {
    const Array &a = in(0);
    node.value = Array(a.shape());
    const double *pa = a.data();
    double *po = node.value.data();
    for (int64_t i = 0; i < a.size(); ++i)
      po[i] = f(pa[i]);
  };

  switch (node.kind) {
  case OpKind::kInput:
  case OpKind::kConstant:
    return;

  case OpKind::kAdd:
  case OpKind::kSub:
  case OpKind::kMul:
  case OpKind::kDiv: {
    const Array &a = in(0), &b = in(1);
    const char *name = op_name(node.kind);
    node.value = Array(broadcast_shape(name, a.shape(), b.shape()));
    switch (node.kind) {
    case OpKind::kAdd:
      binary_apply(a, b, node.value, [](double x, double y) { return x + y; });
      break;
    case OpKind::kSub:
      binary_apply(a, b, node.value, [](double x, double y) { return x - y; });
      break;
    case OpKind::kMul:
      binary_apply(a, b, node.value, [](double x, double y) { return x * y; });
      break;
    default:
      for (double v: b.values())
        if (v == 0.0)
          throw DivisionByZero("div: zero denominator (shape "
                               + shape_str(b.shape()) + ")");
      binary_apply(a, b, node.value, [](double x, double y) { return x / y; });
      break;
    }
    return;
  }

  case OpKind::kMatMul: {
    const Array &a = in(0), &b = in(1);
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
      shape_fail("matmul", a.shape(), b.shape());
    node.value = Array::matrix(a.rows(), b.cols());
    as_mat(node.value).noalias() = as_mat(a) * as_mat(b);
    return;
  }

  case OpKind::kTranspose: {
    const Array &a = in(0);
    require_rank2("transpose", a);
    node.value = Array::matrix(a.cols(), a.rows());
    as_mat(node.value) = as_mat(a).transpose();
    return;
  }

  case OpKind::kReshape:
    node.value = in(0).reshaped(node.target);
    return;

  case OpKind::kBroadcast: {
    const Array &a = in(0);
    require_rank2("broadcast", a);
    if (node.target.size() != 2)
      shape_fail("broadcast", a.shape(), node.target);
    if (broadcast_shape("broadcast", node.target, a.shape()) != node.target)
      shape_fail("broadcast", a.shape(), node.target);
    node.value = Array(node.target);
    binary_apply(node.value, a, node.value,
                 [](double, double y) { return y; });
    return;
  }

  case OpKind::kSum:
  case OpKind::kMean: {
    const Array &a = in(0);
    double s = 0.0;
    for (double v: a.values())
      s += v;
    if (node.kind == OpKind::kMean)
      s /= static_cast<double>(a.size());
    node.value = Array::scalar(s);
    return;
  }

  case OpKind::kSumRows: {
    const Array &a = in(0);
    require_rank2("sum_rows", a);
    node.value = Array::matrix(1, a.cols());
    for (int64_t r = 0; r < a.rows(); ++r)
      for (int64_t c = 0; c < a.cols(); ++c)
        node.value[c] += a(r, c);
    return;
  }

  case OpKind::kSumCols: {
    const Array &a = in(0);
    require_rank2("sum_cols", a);
    node.value = Array::matrix(a.rows(), 1);
    for (int64_t r = 0; r < a.rows(); ++r) {
      double s = 0.0;
      for (int64_t c = 0; c < a.cols(); ++c)
        s += a(r, c);
      node.value[r] = s;
    }
    return;
  }

  case OpKind::kConcatCols: {
    if (node.parents.empty())
      throw ShapeError("concat_cols: no parts");
    const int64_t rows = in(0).rows();
    int64_t cols = 0;
    for (size_t k = 0; k < node.parents.size(); ++k) {
      const Array &p = in(static_cast<int>(k));
      require_rank2("concat_cols", p);
      if (p.rows() != rows)
        shape_fail("concat_cols", in(0).shape(), p.shape());
      cols += p.cols();
    }
    node.value = Array::matrix(rows, cols);
    int64_t off = 0;
    for (size_t k = 0; k < node.parents.size(); ++k) {
      const Array &p = in(static_cast<int>(k));
      for (int64_t r = 0; r < rows; ++r)
        std::copy_n(p.data() + r * p.cols(), p.cols(),
                    node.value.data() + r * cols + off);
      off += p.cols();
    }
    return;
  }

  case OpKind::kConcatRows: {
    if (node.parents.empty())
      throw ShapeError("concat_rows: no parts");
    const int64_t cols = in(0).cols();
    int64_t rows = 0;
    for (size_t k = 0; k < node.parents.size(); ++k) {
      const Array &p = in(static_cast<int>(k));
      require_rank2("concat_rows", p);
      if (p.cols() != cols)
        shape_fail("concat_rows", in(0).shape(), p.shape());
      rows += p.rows();
    }
    node.value = Array::matrix(rows, cols);
    double *dst = node.value.data();
    for (size_t k = 0; k < node.parents.size(); ++k) {
      const Array &p = in(static_cast<int>(k));
      dst = std::copy_n(p.data(), p.size(), dst);
    }
    return;
  }

  case OpKind::kSliceCols: {
    const Array &a = in(0);
    require_rank2("slice_cols", a);
    if (node.start < 0 || node.len <= 0 || node.start + node.len > a.cols())
      throw ShapeError("slice_cols: range [" + std::to_string(node.start)
                       + ", " + std::to_string(node.start + node.len)
                       + ") outside " + shape_str(a.shape()));
    node.value = Array::matrix(a.rows(), node.len);
    for (int64_t r = 0; r < a.rows(); ++r)
      std::copy_n(a.data() + r * a.cols() + node.start, node.len,
                  node.value.data() + r * node.len);
    return;
  }

  case OpKind::kGatherRows: {
    const Array &a = in(0);
    require_rank2("gather_rows", a);
    const auto &idx = *node.index;
    if (idx.empty())
      throw ShapeError("gather_rows: empty index list");
    node.value = Array::matrix(static_cast<int64_t>(idx.size()), a.cols());
    for (size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] < 0 || idx[k] >= a.rows())
        throw ShapeError("gather_rows: index " + std::to_string(idx[k])
                         + " outside " + shape_str(a.shape()));
      std::copy_n(a.data() + idx[k] * a.cols(), a.cols(),
                  node.value.data() + k * a.cols());
    }
    return;
  }

  case OpKind::kScatterAddRows: {
    const Array &a = in(0);
    require_rank2("scatter_add_rows", a);
    const auto &idx = *node.index;
    if (static_cast<int64_t>(idx.size()) != a.rows())
      throw ShapeError("scatter_add_rows: " + std::to_string(idx.size())
                       + " indices for " + shape_str(a.shape()));
    node.value = Array::matrix(node.len, a.cols());
    for (size_t k = 0; k < idx.size(); ++k) {
      if (idx[k] < 0 || idx[k] >= node.len)
        throw ShapeError("scatter_add_rows: index " + std::to_string(idx[k])
                         + " outside " + std::to_string(node.len) + " rows");
      const double *src = a.data() + k * a.cols();
      double *dst = node.value.data() + idx[k] * a.cols();
      for (int64_t c = 0; c < a.cols(); ++c)
        dst[c] += src[c];
    }
    return;
  }

  case OpKind::kRelu:
    unary([](double x) { return x > 0 ? x : 0.0; });
    return;
  case OpKind::kTanh:
    unary([](double x) { return std::tanh(x); });
    return;
  case OpKind::kSigmoid:
    unary(sigmoid_scalar);
    return;
  case OpKind::kSoftplus:
    unary(softplus_scalar);
    return;
  case OpKind::kExp:
    unary([](double x) { return std::exp(x); });
    return;
  case OpKind::kLog:
    for (double v: in(0).values())
      if (!(v > 0.0))
        throw Error("log: non-positive argument");
    unary([](double x) { return std::log(x); });
    return;
  case OpKind::kNeg:
    unary([](double x) { return -x; });
    return;
  case OpKind::kScale: {
    const double c = node.scalar;
    unary([c](double x) { return c * x; });
    return;
  }
  case OpKind::kSquare:
    unary([](double x) { return x * x; });
    return;
  }
}

std::vector<Array> DiffGraph::evaluate(const NamedArrays &inputs,
                                       std::span<const Var> outputs) {
  // Only nodes downstream of a rebound input are recomputed; nodes are
  // stored in topological order, so one forward pass marks them.
  std::vector<char> dirty(nodes_.size(), 0);
  for (const auto &[name, value]: inputs) {
    const int id = input_var(name).id;
    Node &node = nodes_[id];
    if (node.value.shape() != value.shape())
      shape_fail(("input '" + name + "'").c_str(), node.value.shape(),
                 value.shape());
    node.value = value;
    dirty[id] = 1;
  }
  for (size_t i = 0; i < nodes_.size(); ++i) {
    Node &node = nodes_[i];
    for (int parent: node.parents)
      dirty[i] = dirty[i] || dirty[parent];
    if (dirty[i])
      compute(node);
  }

  std::vector<Array> out;
  out.reserve(outputs.size());
  for (Var v: outputs) {
    check_var(v);
    out.push_back(nodes_[v.id].value);
  }
  return out;
}

void DiffGraph::backprop(int id, const Array &adj,
                         std::vector<Array> &adjs) const {
  const Node &node = nodes_[id];
  auto in = [&](int k) -> const Array & {
    return nodes_[node.parents[k]].value;
  };
  auto grad = [&](int k) -> Array & {
    Array &g = adjs[node.parents[k]];
    if (g.size() == 0)
      g = Array(nodes_[node.parents[k]].value.shape());
    return g;
  };
  auto unary = [&](auto &&df) {
    const Array &x = in(0);
    const Array &y = node.value;
    Array &g = grad(0);
    for (int64_t i = 0; i < x.size(); ++i)
      g[i] += adj[i] * df(x[i], y[i]);
  };

  switch (node.kind) {
  case OpKind::kInput:
  case OpKind::kConstant:
    return;

  case OpKind::kAdd:
    accumulate_reduced(adj, grad(0));
    accumulate_reduced(adj, grad(1));
    return;
  case OpKind::kSub:
    accumulate_reduced(adj, grad(0));
    accumulate_reduced(adj, grad(1), -1.0);
    return;
  case OpKind::kMul:
  case OpKind::kDiv: {
    const Array &a = in(0), &b = in(1);
    Array da(adj.shape()), db(adj.shape());
    if (node.kind == OpKind::kMul) {
      binary_apply(adj, b, da, [](double g, double y) { return g * y; });
      binary_apply(adj, a, db, [](double g, double x) { return g * x; });
    } else {
      binary_apply(adj, b, da, [](double g, double y) { return g / y; });
      // d(a/b)/db = -out / b
      Array tmp(adj.shape());
      binary_apply(node.value, b, tmp,
                   [](double o, double y) { return -o / y; });
      for (int64_t i = 0; i < db.size(); ++i)
        db[i] = adj[i] * tmp[i];
    }
    accumulate_reduced(da, grad(0));
    accumulate_reduced(db, grad(1));
    return;
  }

  case OpKind::kMatMul: {
    const Array &a = in(0), &b = in(1);
    as_mat(grad(0)).noalias() += as_mat(adj) * as_mat(b).transpose();
    as_mat(grad(1)).noalias() += as_mat(a).transpose() * as_mat(adj);
    return;
  }

  case OpKind::kTranspose:
    as_mat(grad(0)) += as_mat(adj).transpose();
    return;

  case OpKind::kReshape: {
    Array &g = grad(0);
    for (int64_t i = 0; i < g.size(); ++i)
      g[i] += adj[i];
    return;
  }

  case OpKind::kBroadcast:
    accumulate_reduced(adj, grad(0));
    return;

  case OpKind::kSum:
  case OpKind::kMean: {
    Array &g = grad(0);
    const double s = node.kind == OpKind::kMean
                         ? adj[0] / static_cast<double>(g.size())
                         : adj[0];
    for (int64_t i = 0; i < g.size(); ++i)
      g[i] += s;
    return;
  }

  case OpKind::kSumRows: {
    Array &g = grad(0);
    for (int64_t r = 0; r < g.rows(); ++r)
      for (int64_t c = 0; c < g.cols(); ++c)
        g(r, c) += adj[c];
    return;
  }

  case OpKind::kSumCols: {
    Array &g = grad(0);
    for (int64_t r = 0; r < g.rows(); ++r)
      for (int64_t c = 0; c < g.cols(); ++c)
        g(r, c) += adj[r];
    return;
  }

  case OpKind::kConcatCols: {
    const int64_t cols = adj.cols();
    int64_t off = 0;
    for (size_t k = 0; k < node.parents.size(); ++k) {
      Array &g = grad(static_cast<int>(k));
      for (int64_t r = 0; r < g.rows(); ++r)
        for (int64_t c = 0; c < g.cols(); ++c)
          g(r, c) += adj[r * cols + off + c];
      off += g.cols();
    }
    return;
  }

  case OpKind::kConcatRows: {
    int64_t off = 0;
    for (size_t k = 0; k < node.parents.size(); ++k) {
      Array &g = grad(static_cast<int>(k));
      for (int64_t i = 0; i < g.size(); ++i)
        g[i] += adj[off + i];
      off += g.size();
    }
    return;
  }

  case OpKind::kSliceCols: {
    Array &g = grad(0);
    for (int64_t r = 0; r < g.rows(); ++r)
      for (int64_t c = 0; c < node.len; ++c)
        g(r, node.start + c) += adj(r, c);
    return;
  }

  case OpKind::kGatherRows: {
    Array &g = grad(0);
    const auto &idx = *node.index;
    const int64_t cols = g.cols();
    for (size_t k = 0; k < idx.size(); ++k) {
      const double *src = adj.data() + k * cols;
      double *dst = g.data() + idx[k] * cols;
      for (int64_t c = 0; c < cols; ++c)
        dst[c] += src[c];
    }
    return;
  }

  case OpKind::kScatterAddRows: {
    Array &g = grad(0);
    const auto &idx = *node.index;
    const int64_t cols = g.cols();
    for (size_t k = 0; k < idx.size(); ++k) {
      const double *src = adj.data() + idx[k] * cols;
      double *dst = g.data() + k * cols;
      for (int64_t c = 0; c < cols; ++c)
        dst[c] += src[c];
    }
    return;
  }

  case OpKind::kRelu:
    unary([](double x, double) { return x > 0 ? 1.0 : 0.0; });
    return;
  case OpKind::kTanh:
    unary([](double, double y) { return 1.0 - y * y; });
    return;
  case OpKind::kSigmoid:
    unary([](double, double y) { return y * (1.0 - y); });
    return;
  case OpKind::kSoftplus:
    unary([](double x, double) { return sigmoid_scalar(x); });
    return;
  case OpKind::kExp:
    unary([](double, double y) { return y; });
    return;
  case OpKind::kLog:
    unary([](double x, double) { return 1.0 / x; });
    return;
  case OpKind::kNeg:
    unary([](double, double) { return -1.0; });
    return;
  case OpKind::kScale: {
    const double c = node.scalar;
    unary([c](double, double) { return c; });
    return;
  }
  case OpKind::kSquare:
    unary([](double x, double) { return 2.0 * x; });
    return;
  }
}

std::vector<Array> DiffGraph::backward(Var seed) const {
  check_var(seed);
  const Array &out = nodes_[seed.id].value;
  if (out.size() != 1)
    throw ShapeError("backward: seed must be scalar, got "
                     + shape_str(out.shape()));

  std::vector<Array> adjs(nodes_.size());
  adjs[seed.id] = Array(out.shape(), 1.0);
  for (int id = seed.id; id >= 0; --id) {
    if (adjs[id].size() == 0)
      continue;
    backprop(id, adjs[id], adjs);
  }
  return adjs;
}

NamedArrays DiffGraph::input_gradients(Var seed) const {
  std::vector<Array> adjs = backward(seed);
  NamedArrays out;
  for (const auto &[name, id]: inputs_) {
    Array &a = adjs[id];
    out.emplace(name, a.size() == 0 ? Array(nodes_[id].value.shape())
                                    : std::move(a));
  }
  return out;
}

NamedArrays DiffGraph::gradients(const NamedArrays &inputs, Var seed) {
  evaluate(inputs, {});
  return input_gradients(seed);
}

} // namespace msde
