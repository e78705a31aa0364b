//
// SPDX-License-Identifier: Apache-2.0
//

#include <cmath>

#include <gtest/gtest.h>

#include "msde/objectives.h"
#include "msde/synthetic.h"
#include "oracle_values.h"

namespace msde {
namespace {

Model small_model(uint64_t seed = 3) {
  ModelConfig cfg;
  cfg.width = 12;
  cfg.encoder_layers = 1;
  cfg.attention_layers = 1;
  cfg.gcn_layers = 1;
  cfg.time_freqs = 4;
  cfg.rbf.centers = 8;
  return make_model(cfg, NoiseSchedule::ve(0.01, 10.0), seed);
}

Batch small_batch(int n = 3, uint64_t seed = 21) {
  return { generate_synthetic(n, 5), seed, 0.0 };
}

Array column(std::span<const double> v) {
  return Array({ static_cast<int64_t>(v.size()), 1 },
               std::vector<double>(v.begin(), v.end()));
}

double nce(const Array &pos, const Array &neg) {
  DiffGraph g;
  return ebm_nce_from_logits(g.constant(pos), g.constant(neg)).value().item();
}

TEST(EbmNceTest, MatchesReference) {
  EXPECT_NEAR(nce(column(oracle::kNcePos), column(oracle::kNceNeg)),
              oracle::kNceLoss[0], 1e-14);
}

TEST(EbmNceTest, BoundaryValues) {
  EXPECT_NEAR(nce(Array({ 5, 1 }), Array({ 5, 1 })), 2 * std::log(2.0),
              1e-12);
  EXPECT_LT(nce(Array({ 5, 1 }, 40.0), Array({ 5, 1 }, -40.0)), 1e-6);
}

TEST(EbmNceTest, RepresentationLossMatchesReference) {
  DiffGraph g;
  Var z2 = g.constant(Array({ 4, 2 }, std::vector<double>(
                                          std::begin(oracle::kNceZ2),
                                          std::end(oracle::kNceZ2))));
  Var z3 = g.constant(Array({ 4, 2 }, std::vector<double>(
                                          std::begin(oracle::kNceZ3),
                                          std::end(oracle::kNceZ3))));
  Rng rng(11);
  EXPECT_NEAR(ebm_nce_loss(z2, z3, rng).value().item(),
              oracle::kNceReprLoss[0], 1e-14);
  Var one = g.constant(Array::matrix(1, 2));
  EXPECT_THROW(ebm_nce_loss(one, one, rng), Error);
}

TEST(ObjectiveTest, WeightValidation) {
  EXPECT_THROW((LossWeights { 0, 0, 0 }).validate(), Error);
  EXPECT_THROW((LossWeights { -1, 1, 1 }).validate(), Error);
  EXPECT_NO_THROW((LossWeights { 0, 1, 0 }).validate());
  Batch b = small_batch();
  b.mask_ratio = 1.0;
  EXPECT_THROW(b.validate(), Error);
}

TEST(ObjectiveTest, ExactTargetGivesZero) {
  DiffGraph g;
  const Array target = Array::from_rows({ { 0.5, -1.0, 2.0 } });
  EXPECT_EQ(weighted_sq_error(g.constant(target), target, 3.0, 2.0)
                .value()
                .item(),
            0.0);
  const Array off = Array::from_rows({ { 1.5, -1.0, 2.0 } });
  EXPECT_DOUBLE_EQ(
      weighted_sq_error(g.constant(off), target, 3.0, 2.0).value().item(),
      1.5);
}

TEST(ObjectiveTest, TotalIsWeightedSumOfTerms) {
  const Model m = small_model();
  const Batch b = small_batch();
  const LossValues all = evaluate_loss(m, b, { 1, 1, 1 }).values;
  const LossValues w = evaluate_loss(m, b, { 0.5, 2.0, 0.25 }).values;
  EXPECT_EQ(w.contrastive, all.contrastive);
  EXPECT_EQ(w.conf, all.conf);
  EXPECT_EQ(w.topo, all.topo);
  EXPECT_NEAR(w.total, 0.5 * all.contrastive + 2 * all.conf + 0.25 * all.topo,
              1e-12 * std::abs(w.total));

  const LossValues conf_only = evaluate_loss(m, b, { 0, 1, 0 }).values;
  EXPECT_EQ(conf_only.total, all.conf);
  EXPECT_EQ(conf_only.contrastive, 0.0);
  EXPECT_EQ(conf_only.topo, 0.0);
}

TEST(ObjectiveTest, ConformerLossIsRotationInvariant) {
  const Model m = small_model();
  const MoleculePair mol = synthetic_molecule(SyntheticFamily::kRing, 2);
  Rng rng(30);
  Coords noise(mol.num_atoms(), 3);
  for (int64_t i = 0; i < noise.size(); ++i)
    noise.data()[i] = standard_normal(rng);
  const Mat3 q = random_rotation(rng);
  auto loss = [&](const Coords &x0, const Coords &z) {
    DiffGraph g;
    ParamBinder p(g, m.params);
    Var h = encode_2d(p, m.config, apply_mask(mol.topo, MaskSpec {}));
    return conformer_dsm_loss(p, m, mol.topo, h, x0, z, 0.4).value().item();
  };
  const double a = loss(mol.geom.coords, noise);
  const double b =
      loss(mol.geom.coords * q.transpose(), noise * q.transpose());
  EXPECT_NEAR(a, b, 1e-9 * std::abs(a));
}

TEST(ObjectiveTest, TopologyLossIgnoresConditioningPose) {
  const Model m = small_model();
  const MoleculePair mol = synthetic_molecule(SyntheticFamily::kBranched, 2);
  const int n = mol.num_atoms();
  Rng rng(31);
  Array atom_noise({ n, kAtomOneHotWidth }), edge_noise({ n, n, 5 });
  for (double &v: atom_noise.values())
    v = standard_normal(rng);
  for (double &v: edge_noise.values())
    v = standard_normal(rng);
  const Mat3 q = random_rotation(rng);
  auto loss = [&](const Molecule3D &geom) {
    DiffGraph g;
    ParamBinder p(g, m.params);
    Var h = encode_3d(p, m.config, apply_mask(geom, MaskSpec {}));
    return topology_dsm_loss(p, m, h, geom.coords, mol.topo, atom_noise,
                             edge_noise, 0.6)
        .value()
        .item();
  };
  Molecule3D moved = mol.geom;
  moved.coords = mol.geom.coords * q.transpose();
  moved.coords.rowwise() += Eigen::RowVector3d(1, 2, -4);
  const double a = loss(mol.geom);
  EXPECT_NEAR(a, loss(moved), 1e-9 * std::abs(a));
}

TEST(ObjectiveTest, GradientCheckThroughTotalLoss) {
  const Model m = small_model();
  const GradientCheckReport r =
      gradient_check(m, small_batch(2), { 1, 1, 1 }, 0.05, 4);
  EXPECT_GT(r.checked, 100);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 2;
  c.seed = 17;
  return c;
}

TEST(TrainTest, ZeroEpochsKeepsInitialization) {
  Model m = small_model();
  const NamedArrays before = m.params;
  TrainConfig c = quick_config();
  c.epochs = 0;
  EXPECT_TRUE(train(m, generate_synthetic(4, 1), c).empty());
  EXPECT_EQ(m.params, before);
}

TEST(TrainTest, Deterministic) {
  Model a = small_model(), b = small_model();
  const auto corpus = generate_synthetic(5, 1);
  const auto ca = train(a, corpus, quick_config());
  const auto cb = train(b, corpus, quick_config());
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(ca.size(), 2u);
  EXPECT_EQ(ca[1].mean.total, cb[1].mean.total);
}

TEST(TrainTest, ConformationLossDecreasesOnOneMolecule) {
  Model m = small_model();
  const std::vector<MoleculePair> corpus { synthetic_molecule(
      SyntheticFamily::kChain, 3) };
  TrainConfig c;
  c.epochs = 150;
  c.batch_size = 1;
  c.weights = { 0, 1, 0 };
  c.adam.lr = 3e-3;
  c.seed = 2;
  double before = 0, after = 0;
  for (uint64_t s = 0; s < 20; ++s)
    before += evaluate_loss(m, { corpus, s, 0.0 }, c.weights).values.conf;
  train(m, corpus, c);
  for (uint64_t s = 0; s < 20; ++s)
    after += evaluate_loss(m, { corpus, s, 0.0 }, c.weights).values.conf;
  EXPECT_LT(after, 0.8 * before);
}

TEST(TrainTest, InvalidConfigRejected) {
  TrainConfig c = quick_config();
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = quick_config();
  c.mask_ratio = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

} // namespace
} // namespace msde
