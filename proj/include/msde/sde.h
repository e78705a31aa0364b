//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_SDE_H_
#define MSDE_SDE_H_

#include <functional>
#include <string>

#include "msde/array.h"
#include "msde/random.h"

namespace msde {

enum class SdeVariant { kVE, kVP };

SdeVariant parse_sde_variant(const std::string &s);
std::string to_string(SdeVariant v);

struct NoiseSchedule {
  SdeVariant variant = SdeVariant::kVE;
  double sigma_min = 0.01;
  double sigma_max = 10.0;
  double beta_min = 0.1;
  double beta_max = 10.0;
  int steps = 250;

  void validate() const;

  static NoiseSchedule ve(double sigma_min, double sigma_max, int steps = 250) {
    return { SdeVariant::kVE, sigma_min, sigma_max, 0.1, 10.0, steps };
  }
  static NoiseSchedule vp(double beta_min, double beta_max, int steps = 250) {
    return { SdeVariant::kVP, 0.01, 10.0, beta_min, beta_max, steps };
  }
};

/// x_t | x_0 ~ N(mean_coef * x_0, std^2 I).
struct PerturbKernel {
  double mean_coef;
  double std;
};

PerturbKernel kernel_at(const NoiseSchedule &sched, double t);

// Drift is f(x, t) = drift_coef(t) * x; squared diffusion g(t)^2.
double drift_coef(const NoiseSchedule &sched, double t);
double diffusion_sq(const NoiseSchedule &sched, double t);

// Standard deviation of the prior at t = 1.
double prior_std(const NoiseSchedule &sched);

struct Perturbed {
  Array x_t;
  Array noise;
};

Perturbed perturb(const Array &x0, double t, const NoiseSchedule &sched,
                  Rng &rng);

/// Analytic score of the perturbation kernel, (a x_0 - x_t) / s^2.
Array dsm_target(const Array &x_t, const Array &x0, const PerturbKernel &k);

/// One reverse-time Euler-Maruyama step from t to t - dt. When `mean_out`
/// is non-null it receives the noise-free part of the update.
Array predictor_step(const Array &x, double t, double dt, const Array &score,
                     const NoiseSchedule &sched, Rng &rng,
                     Array *mean_out = nullptr);

using ScoreFn = std::function<Array(const Array &x)>;
using TimeScoreFn = std::function<Array(const Array &x, double t)>;
using ProjectFn = std::function<void(Array &x)>;

/// x <- x + (eps^2 / 2) score(x) + eps z, applied `steps` times.
Array langevin_corrector(const Array &x, const ScoreFn &score, double eps,
                         int steps, Rng &rng);

struct PcOptions {
  int corrector_steps = 1;
  // Corrector step size is set per step from this signal-to-noise ratio:
  // eps = 2 * snr * |z| / |score|.
  double snr = 0.16;
  // Applied after every update, e.g. to remove the centroid.
  ProjectFn project;
};

/// Predictor-corrector sampling from the prior at t = 1 down to t = 0 over
/// sched.steps uniform steps. Each step runs the corrector at the current
/// time, then the predictor; the final predictor step returns its mean.
Array pc_sample(const TimeScoreFn &score, const NoiseSchedule &sched,
                const Shape &shape, const PcOptions &opts, Rng &rng);

Array sample_normal(const Shape &shape, double std, Rng &rng);

} // namespace msde

#endif // MSDE_SDE_H_
