//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/sde.h"

#include <cmath>

namespace msde {
namespace {
  void check_time(double t) {
    if (!(t >= 0.0 && t <= 1.0))
      throw Error("diffusion time " + std::to_string(t) + " outside [0, 1]");
  }

  double sq_norm(const Array &a) {
    double s = 0;
    for (double v: a.values())
      s += v * v;
    return s;
  }
} // namespace

SdeVariant parse_sde_variant(const std::string &s) {
  if (s == "ve" || s == "VE")
    return SdeVariant::kVE;
  if (s == "vp" || s == "VP")
    return SdeVariant::kVP;
  throw Error("unknown SDE variant '" + s + "' (expected ve or vp)");
}

std::string to_string(SdeVariant v) {
  return v == SdeVariant::kVE ? "ve" : "vp";
}

void NoiseSchedule::validate() const {
  if (!(sigma_min > 0 && sigma_min < sigma_max))
    throw Error("noise schedule requires 0 < sigma_min < sigma_max");
  if (!(beta_min > 0 && beta_min < beta_max))
    throw Error("noise schedule requires 0 < beta_min < beta_max");
  if (steps < 0)
    throw Error("noise schedule requires steps >= 0");
}

PerturbKernel kernel_at(const NoiseSchedule &sched, double t) {
  check_time(t);
  if (sched.variant == SdeVariant::kVE)
    return { 1.0,
             sched.sigma_min * std::pow(sched.sigma_max / sched.sigma_min, t) };
  const double log_a = -0.25 * t * t * (sched.beta_max - sched.beta_min)
                       - 0.5 * t * sched.beta_min;
  const double a = std::exp(log_a);
  // 1 - a^2 computed as -expm1(2 log a) to keep precision near t = 0.
  return { a, std::sqrt(-std::expm1(2.0 * log_a)) };
}

double drift_coef(const NoiseSchedule &sched, double t) {
  if (sched.variant == SdeVariant::kVE)
    return 0.0;
  return -0.5 * (sched.beta_min + t * (sched.beta_max - sched.beta_min));
}

double diffusion_sq(const NoiseSchedule &sched, double t) {
  if (sched.variant == SdeVariant::kVP)
    return sched.beta_min + t * (sched.beta_max - sched.beta_min);
  const double sigma =
      sched.sigma_min * std::pow(sched.sigma_max / sched.sigma_min, t);
  return 2.0 * sigma * sigma * std::log(sched.sigma_max / sched.sigma_min);
}

double prior_std(const NoiseSchedule &sched) {
  return sched.variant == SdeVariant::kVE ? sched.sigma_max : 1.0;
}

Array sample_normal(const Shape &shape, double std, Rng &rng) {
  Array z(shape);
  for (auto &v: z.values())
    v = std * standard_normal(rng);
  return z;
}

Perturbed perturb(const Array &x0, double t, const NoiseSchedule &sched,
                  Rng &rng) {
  const PerturbKernel k = kernel_at(sched, t);
  Perturbed out { Array(x0.shape()), sample_normal(x0.shape(), 1.0, rng) };
  for (int64_t i = 0; i < x0.size(); ++i)
    out.x_t[i] = k.mean_coef * x0[i] + k.std * out.noise[i];
  return out;
}

Array dsm_target(const Array &x_t, const Array &x0, const PerturbKernel &k) {
  if (x_t.shape() != x0.shape())
    throw ShapeError("dsm_target: shapes " + shape_str(x_t.shape()) + " and "
                     + shape_str(x0.shape()));
  if (!(k.std > 0))
    throw Error("dsm_target: kernel std must be positive");
  const double inv_var = 1.0 / (k.std * k.std);
  Array out(x0.shape());
  for (int64_t i = 0; i < x0.size(); ++i)
    out[i] = (k.mean_coef * x0[i] - x_t[i]) * inv_var;
  return out;
}

Array predictor_step(const Array &x, double t, double dt, const Array &score,
                     const NoiseSchedule &sched, Rng &rng, Array *mean_out) {
  if (!(dt > 0) || t - dt < -1e-12)
    throw Error("predictor_step: need dt > 0 and t - dt >= 0");
  if (score.shape() != x.shape())
    throw ShapeError("predictor_step: score " + shape_str(score.shape())
                     + " vs state " + shape_str(x.shape()));
  const double f = drift_coef(sched, t);
  const double g2 = diffusion_sq(sched, t);
  const double noise_scale = std::sqrt(g2 * dt);
  Array mean(x.shape());
  Array out(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    mean[i] = x[i] - (f * x[i] - g2 * score[i]) * dt;
    out[i] = mean[i] + noise_scale * standard_normal(rng);
  }
  if (mean_out)
    *mean_out = std::move(mean);
  return out;
}

Array langevin_corrector(const Array &x, const ScoreFn &score, double eps,
                         int steps, Rng &rng) {
  if (!(eps > 0))
    throw Error("langevin_corrector: eps must be positive");
  if (steps < 0)
    throw Error("langevin_corrector: steps must be non-negative");
  Array cur = x;
  const double half = 0.5 * eps * eps;
  for (int s = 0; s < steps; ++s) {
    const Array g = score(cur);
    for (int64_t i = 0; i < cur.size(); ++i)
      cur[i] += half * g[i] + eps * standard_normal(rng);
  }
  return cur;
}

Array pc_sample(const TimeScoreFn &score, const NoiseSchedule &sched,
                const Shape &shape, const PcOptions &opts, Rng &rng) {
  sched.validate();
  Array x = sample_normal(shape, prior_std(sched), rng);
  if (opts.project)
    opts.project(x);
  const int n = sched.steps;
  if (n == 0)
    return x;

  const double dt = 1.0 / n;
  Array mean;
  for (int i = 0; i < n; ++i) {
    const double t = 1.0 - i * dt;
    for (int c = 0; c < opts.corrector_steps; ++c) {
      const Array g = score(x, t);
      const Array z = sample_normal(shape, 1.0, rng);
      const double gn = std::sqrt(sq_norm(g));
      if (gn == 0.0)
        continue;
      const double eps = 2.0 * opts.snr * std::sqrt(sq_norm(z)) / gn;
      const double half = 0.5 * eps * eps;
      for (int64_t k = 0; k < x.size(); ++k)
        x[k] += half * g[k] + eps * z[k];
      if (opts.project)
        opts.project(x);
    }
    const Array g = score(x, t);
    x = predictor_step(x, t, std::min(dt, t), g, sched, rng, &mean);
    if (opts.project) {
      opts.project(x);
      opts.project(mean);
    }
  }
  return mean;
}

} // namespace msde
