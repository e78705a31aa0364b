//
// SPDX-License-Identifier: Apache-2.0
//

#include <cmath>

#include <gtest/gtest.h>

#include "msde/sde.h"
#include "oracle_values.h"

namespace msde {
namespace {

const NoiseSchedule kVe = NoiseSchedule::ve(0.01, 10.0);
const NoiseSchedule kVp = NoiseSchedule::vp(0.1, 10.0);

TEST(SdeTest, KernelsMatchReference) {
  for (size_t i = 0; i < std::size(oracle::kKernelTimes); ++i) {
    const double t = oracle::kKernelTimes[i];
    const PerturbKernel ve = kernel_at(kVe, t);
    EXPECT_EQ(ve.mean_coef, 1.0);
    EXPECT_NEAR(ve.std, oracle::kVeStd[i], 1e-12 * oracle::kVeStd[i]);
    const PerturbKernel vp = kernel_at(kVp, t);
    EXPECT_NEAR(vp.mean_coef, oracle::kVpMean[i], 1e-14);
    EXPECT_NEAR(vp.std, oracle::kVpStd[i], 1e-14);
  }
  EXPECT_NEAR(diffusion_sq(kVe, 0.5), oracle::kVeDiffusionSqMid[0], 1e-12);
  EXPECT_NEAR(drift_coef(kVp, 0.5), oracle::kVpDriftMid[0], 1e-14);
  EXPECT_EQ(drift_coef(kVe, 0.5), 0.0);
  EXPECT_NEAR(diffusion_sq(kVp, 0.5), 5.05, 1e-14);
  EXPECT_EQ(prior_std(kVe), 10.0);
  EXPECT_EQ(prior_std(kVp), 1.0);
}

TEST(SdeTest, InvalidInputs) {
  EXPECT_THROW(kernel_at(kVe, 1.5), Error);
  EXPECT_THROW(kernel_at(kVe, -0.1), Error);
  EXPECT_THROW(NoiseSchedule::ve(1.0, 0.5).validate(), Error);
  EXPECT_THROW(NoiseSchedule::vp(0.0, 1.0).validate(), Error);
  EXPECT_THROW(parse_sde_variant("ode"), Error);
  EXPECT_EQ(parse_sde_variant("vp"), SdeVariant::kVP);
  EXPECT_THROW(dsm_target(Array::matrix(2, 3), Array::matrix(3, 2),
                          { 1.0, 0.5 }),
               ShapeError);
}

TEST(SdeTest, PerturbIsDeterministicAndConsistent) {
  Array x0 = Array::matrix(4, 3, 0.7);
  Rng a(3), b(3);
  const Perturbed p = perturb(x0, 0.4, kVp, a);
  const Perturbed q = perturb(x0, 0.4, kVp, b);
  EXPECT_EQ(p.x_t, q.x_t);
  const PerturbKernel k = kernel_at(kVp, 0.4);
  for (int64_t i = 0; i < x0.size(); ++i)
    EXPECT_NEAR(p.x_t[i], k.mean_coef * x0[i] + k.std * p.noise[i], 1e-15);
}

TEST(SdeTest, DsmTargetIsLogKernelGradient) {
  const PerturbKernel k = kernel_at(kVp, 0.3);
  const Array x0 = Array::from_rows({ { 0.2, -0.5, 1.0 } });
  const Array xt = Array::from_rows({ { 0.6, 0.1, -0.4 } });
  const Array target = dsm_target(xt, x0, k);
  auto log_kernel = [&](const Array &x) {
    double s = 0;
    for (int64_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - k.mean_coef * x0[i];
      s -= d * d / (2 * k.std * k.std);
    }
    return s;
  };
  const double h = 1e-5;
  for (int64_t i = 0; i < xt.size(); ++i) {
    Array up = xt, down = xt;
    up[i] += h;
    down[i] -= h;
    EXPECT_NEAR(target[i], (log_kernel(up) - log_kernel(down)) / (2 * h), 1e-6);
  }
}

TEST(SdeTest, PerturbMomentsSmallSample) {
  const int n = 20000;
  for (const NoiseSchedule &s: { kVe, kVp }) {
    Rng rng(11);
    const PerturbKernel k = kernel_at(s, 0.6);
    const Perturbed p = perturb(Array({ n, 1 }, 1.0), 0.6, s, rng);
    double mean = 0, sq = 0;
    for (double v: p.x_t.values()) {
      mean += v;
      sq += v * v;
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    EXPECT_NEAR(mean, k.mean_coef, 4 * k.std / std::sqrt(n));
    EXPECT_NEAR(var, k.std * k.std, 4 * k.std * k.std * std::sqrt(2.0 / n));
  }
}

TEST(SdeTest, LangevinStandardNormal) {
  const double eps = 0.1;
  Rng rng(12);
  const Array x = langevin_corrector(
      Array({ 4000, 1 }, 0.0), [](const Array &v) {
        Array s = v;
        for (double &e: s.values())
          e = -e;
        return s;
      },
      eps, 500, rng);
  double mean = 0, sq = 0;
  for (double v: x.values()) {
    mean += v;
    sq += v * v;
  }
  mean /= x.size();
  const double var = sq / x.size() - mean * mean;
  EXPECT_LT(std::abs(mean), 0.08);
  // Started at zero, the chain variance after n steps is
  // v (1 - (1 - eps^2 / 2)^(2n)) with v = 1 / (1 - eps^2 / 4).
  const double v = 1.0 / (1.0 - eps * eps / 4);
  EXPECT_NEAR(var, v * (1 - std::pow(1 - eps * eps / 2, 1000)), 0.08);
  EXPECT_THROW(langevin_corrector(x, {}, 0.0, 1, rng), Error);
}

TEST(SdeTest, PredictorStepMatchesVeUpdate) {
  Rng rng(13);
  const Array x = Array::from_rows({ { 1.0, -2.0 } });
  const Array score = Array::from_rows({ { 0.5, 0.25 } });
  Array mean;
  predictor_step(x, 0.5, 0.1, score, kVe, rng, &mean);
  const double g2 = diffusion_sq(kVe, 0.5);
  EXPECT_NEAR(mean[0], 1.0 + g2 * 0.5 * 0.1, 1e-12);
  EXPECT_NEAR(mean[1], -2.0 + g2 * 0.25 * 0.1, 1e-12);
  EXPECT_THROW(predictor_step(x, 0.05, 0.1, score, kVe, rng), Error);
}

TEST(SdeTest, PcSampleRecoversGaussianData) {
  // Data N(0, 0.5^2): the perturbed marginal is N(0, a^2 0.25 + s^2).
  const NoiseSchedule sched = NoiseSchedule::vp(0.1, 10.0, 200);
  const double data_var = 0.25;
  auto score = [&](const Array &x, double t) {
    const PerturbKernel k = kernel_at(sched, t);
    const double v = k.mean_coef * k.mean_coef * data_var + k.std * k.std;
    Array s = x;
    for (double &e: s.values())
      e = -e / v;
    return s;
  };
  Rng rng(14);
  const Array x = pc_sample(score, sched, { 4000, 1 }, PcOptions {}, rng);
  double sq = 0;
  for (double v: x.values())
    sq += v * v;
  EXPECT_NEAR(sq / x.size(), data_var, 0.1 * data_var);
}

} // namespace
} // namespace msde
