//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_TESTS_TEST_SUPPORT_H_
#define MSDE_TESTS_TEST_SUPPORT_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "msde/autodiff.h"
#include "msde/random.h"

namespace msde::testing {

inline Array random_array(Shape shape, Rng &rng, double scale = 1.0) {
  Array a(std::move(shape));
  for (auto &v: a.values())
    v = scale * standard_normal(rng);
  return a;
}

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({ std::abs(a), std::abs(n), 1e-3 });
}

struct GraphCheck {
  int ops = 0;
  int64_t entries = 0;
  double max_rel_error = 0.0;
  std::vector<std::string> op_names;
  std::string worst;
};

/// Builds a random composition of graph ops over three named inputs and
/// compares reverse-mode gradients of the scalar output against central
/// differences on every input entry.
inline GraphCheck random_graph_check(uint64_t seed, double step = 1e-5) {
  Rng rng(seed);
  const int64_t r = 2 + static_cast<int64_t>(uniform_index(rng, 3));
  const int64_t c = 2 + static_cast<int64_t>(uniform_index(rng, 3));
  const int64_t k = 2 + static_cast<int64_t>(uniform_index(rng, 2));

  DiffGraph g;
  NamedArrays inputs { { "a", random_array({ r, c }, rng, 0.7) },
                       { "b", random_array({ r, c }, rng, 0.7) },
                       { "w", random_array({ c, k }, rng, 0.7) } };
  Var a = g.input("a", inputs["a"]);
  Var b = g.input("b", inputs["b"]);
  Var w = g.input("w", inputs["w"]);

  GraphCheck out;
  Var x = a;
  std::vector<int64_t> relu_watch;
  std::vector<Var> relu_inputs;
  const int depth = 3 + static_cast<int>(uniform_index(rng, 5));
  for (int d = 0; d < depth; ++d) {
    const int op = static_cast<int>(uniform_index(rng, 19));
    std::string name;
    switch (op) {
    case 0:
      x = x + b;
      name = "add";
      break;
    case 1:
      x = x - g.scale(b, 0.5);
      name = "sub";
      break;
    case 2:
      x = x * b;
      name = "mul";
      break;
    case 3:
      x = x / (g.sigmoid(b) + g.scalar(0.75));
      name = "div";
      break;
    case 4:
      x = g.tanh(x);
      name = "tanh";
      break;
    case 5:
      x = g.softplus(x);
      name = "softplus";
      break;
    case 6:
      x = g.exp(g.tanh(x));
      name = "exp";
      break;
    case 7:
      x = g.log(g.softplus(x) + g.scalar(0.5));
      name = "log";
      break;
    case 8:
      x = g.matmul(g.matmul(x, w), g.transpose(w));
      name = "matmul";
      break;
    case 9:
      x = g.reshape(g.transpose(g.reshape(x, { c, r })), { r, c });
      name = "reshape";
      break;
    case 10:
      x = x + g.scale(g.broadcast(g.sum_rows(x), { r, c }), 1.0 / r);
      name = "sum_rows";
      break;
    case 11:
      x = x * g.broadcast(g.sum_cols(b), { r, c });
      name = "sum_cols";
      break;
    case 12: {
      const Var parts[] = { x, b };
      Var cat = g.concat_cols(parts);
      x = g.slice_cols(cat, 0, c) + g.slice_cols(cat, 1, c);
      name = "concat_cols";
      break;
    }
    case 13: {
      const Var parts[] = { x, b };
      Var cat = g.concat_rows(parts);
      std::vector<int64_t> idx(r);
      for (int64_t i = 0; i < r; ++i)
        idx[i] = static_cast<int64_t>(uniform_index(rng, 2 * r));
      x = g.gather_rows(cat, make_index(idx));
      name = "gather_rows";
      break;
    }
    case 14: {
      std::vector<int64_t> idx(r);
      for (int64_t i = 0; i < r; ++i)
        idx[i] = static_cast<int64_t>(uniform_index(rng, r));
      x = g.scatter_add_rows(x, make_index(idx), r) + g.scale(x, 0.5);
      name = "scatter_add_rows";
      break;
    }
    case 15:
      x = g.sigmoid(x) + g.square(g.tanh(x));
      name = "sigmoid";
      break;
    case 16:
      x = g.neg(x) + g.broadcast(g.mean(x), { r, c });
      name = "mean";
      break;
    case 17:
      relu_inputs.push_back(x);
      x = g.relu(x) + g.scale(x, 0.1);
      name = "relu";
      break;
    default:
      x = x + g.broadcast(g.mean(g.square(b)), { r, c }) * g.tanh(x);
      name = "sum";
      break;
    }
    out.op_names.push_back(name);
  }
  Var loss = g.sum(g.square(x)) + g.mean(x * a);
  out.ops = depth;

  const NamedArrays analytic = g.input_gradients(loss);
  const Var outputs[] = { loss };
  for (auto &[name, base]: inputs) {
    for (int64_t i = 0; i < base.size(); ++i) {
      Array probe = base;
      probe[i] = base[i] + step;
      const double up = g.evaluate({ { name, probe } }, outputs)[0].item();
      // Skip entries where the step crosses a relu kink.
      bool kink = false;
      for (Var v: relu_inputs)
        for (double z: v.value().values())
          kink = kink || std::abs(z) < 10 * step;
      probe[i] = base[i] - step;
      const double down = g.evaluate({ { name, probe } }, outputs)[0].item();
      for (Var v: relu_inputs)
        for (double z: v.value().values())
          kink = kink || std::abs(z) < 10 * step;
      g.evaluate({ { name, base } }, {});
      if (kink)
        continue;
      const double numeric = (up - down) / (2 * step);
      const double e = rel_error(analytic.at(name)[i], numeric);
      if (e >= out.max_rel_error) {
        out.max_rel_error = e;
        out.worst = name + "[" + std::to_string(i) + "] analytic "
                    + std::to_string(analytic.at(name)[i]) + " numeric "
                    + std::to_string(numeric) + " loss "
                    + std::to_string(loss.value().item());
      }
      ++out.entries;
    }
  }
  return out;
}

} // namespace msde::testing

#endif // MSDE_TESTS_TEST_SUPPORT_H_
