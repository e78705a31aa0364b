//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_AUTODIFF_H_
#define MSDE_AUTODIFF_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "msde/array.h"

namespace msde {

class DivisionByZero: public Error {
public:
  using Error::Error;
};

enum class OpKind {
  kInput,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMatMul,
  kTranspose,
  kReshape,
  kBroadcast,
  kSum,
  kMean,
  kSumRows,
  kSumCols,
  kConcatCols,
  kConcatRows,
  kSliceCols,
  kGatherRows,
  kScatterAddRows,
  kRelu,
  kTanh,
  kSigmoid,
  kSoftplus,
  kExp,
  kLog,
  kNeg,
  kScale,
  kSquare,
};

const char *op_name(OpKind kind);

using IndexList = std::shared_ptr<const std::vector<int64_t>>;

IndexList make_index(std::vector<int64_t> idx);

class DiffGraph;

// Handle to a node of a DiffGraph. Cheap to copy; only valid while the owning
// graph is alive.
struct Var {
  DiffGraph *graph = nullptr;
  int id = -1;

  const Array &value() const;
  const Shape &shape() const { return value().shape(); }
};

/// Reverse-mode differentiation tape over dense arrays.
///
/// Nodes are appended in topological order and evaluated eagerly. The
/// recorded DAG can be re-evaluated with new bindings for its named inputs
/// via evaluate(), which is what finite-difference checks use. Shapes are
/// fixed at construction; rebinding an input with a different shape throws.
class DiffGraph {
public:
  DiffGraph() = default;
  DiffGraph(const DiffGraph &) = delete;
  DiffGraph &operator=(const DiffGraph &) = delete;

  Var input(const std::string &name, Array value);
  Var constant(Array value);
  Var scalar(double v) { return constant(Array::scalar(v)); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var reshape(Var a, Shape shape);
  Var broadcast(Var a, Shape shape);
  Var sum(Var a);
  Var mean(Var a);
  Var sum_rows(Var a);
  Var sum_cols(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var slice_cols(Var a, int64_t start, int64_t len);
  Var gather_rows(Var a, IndexList idx);
  Var scatter_add_rows(Var a, IndexList idx, int64_t out_rows);
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var neg(Var a);
  Var scale(Var a, double c);
  Var square(Var a);

  int size() const { return static_cast<int>(nodes_.size()); }
  OpKind kind(int id) const { return nodes_[id].kind; }
  const std::vector<int> &parents(int id) const { return nodes_[id].parents; }
  const Array &value(int id) const { return nodes_[id].value; }
  const Array &value(Var v) const { return nodes_[v.id].value; }

  bool has_input(const std::string &name) const {
    return inputs_.contains(name);
  }
  Var input_var(const std::string &name) const;
  std::vector<std::string> input_names() const;

  /// Rebinds the given named inputs and recomputes every node. Inputs not
  /// mentioned keep their current values. Returns the values of `outputs`.
  std::vector<Array> evaluate(const NamedArrays &inputs,
                              std::span<const Var> outputs);

  /// Adjoints of every node with respect to the scalar `seed`, using the
  /// current node values. Entries for nodes the seed does not depend on are
  /// zero-filled on demand by the caller-facing accessors.
  std::vector<Array> backward(Var seed) const;

  /// evaluate() followed by backward(); returns d seed / d input for every
  /// named input.
  NamedArrays gradients(const NamedArrays &inputs, Var seed);

  /// Gradients for every named input from the current values.
  NamedArrays input_gradients(Var seed) const;

private:
  struct Node {
    OpKind kind;
    std::vector<int> parents;
    Array value;
    double scalar = 0.0;
    int64_t start = 0;
    int64_t len = 0;
    Shape target;
    IndexList index;
  };

  Var push(Node node);
  void compute(Node &node) const;
  void backprop(int id, const Array &adj, std::vector<Array> &adjs) const;
  void check_var(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> inputs_;
};

inline Var operator+(Var a, Var b) { return a.graph->add(a, b); }
inline Var operator-(Var a, Var b) { return a.graph->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.graph->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.graph->div(a, b); }
inline Var operator-(Var a) { return a.graph->neg(a); }
inline Var operator*(Var a, double c) { return a.graph->scale(a, c); }
inline Var operator*(double c, Var a) { return a.graph->scale(a, c); }

} // namespace msde

#endif // MSDE_AUTODIFF_H_
