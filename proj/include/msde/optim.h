//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_OPTIM_H_
#define MSDE_OPTIM_H_

#include <cstdint>

#include "msde/array.h"

namespace msde {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimState {
  AdamConfig config;
  NamedArrays first_moment;
  NamedArrays second_moment;
  int64_t step = 0;
};

OptimState make_optim_state(const NamedArrays &params, AdamConfig config);

/// Bias-corrected Adam update. Parameters without an entry in `grads` are
/// left untouched. Throws on a non-finite gradient before modifying anything.
void adam_step(NamedArrays &params, const NamedArrays &grads,
               OptimState &state);

} // namespace msde

#endif // MSDE_OPTIM_H_
