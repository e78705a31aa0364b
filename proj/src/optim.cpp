//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/optim.h"

#include <cmath>

namespace msde {

OptimState make_optim_state(const NamedArrays &params, AdamConfig config) {
  OptimState state { .config = config };
  for (const auto &[name, value]: params) {
    state.first_moment.emplace(name, Array(value.shape()));
    state.second_moment.emplace(name, Array(value.shape()));
  }
  return state;
}

void adam_step(NamedArrays &params, const NamedArrays &grads,
               OptimState &state) {
  for (const auto &[name, g]: grads) {
    auto it = params.find(name);
    if (it == params.end())
      throw Error("adam_step: gradient for unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape())
      throw ShapeError("adam_step: parameter '" + name + "' has shape "
                       + shape_str(it->second.shape()) + ", gradient "
                       + shape_str(g.shape()));
    if (!g.all_finite())
      throw Error("adam_step: non-finite gradient for '" + name + "'");
  }

  const AdamConfig &c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  for (const auto &[name, g]: grads) {
    Array &p = params.at(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, g.shape());
    auto [v_it, v_new] = state.second_moment.try_emplace(name, g.shape());
    Array &m = m_it->second;
    Array &v = v_it->second;
    for (int64_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

} // namespace msde
