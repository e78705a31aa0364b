//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_OBJECTIVES_H_
#define MSDE_OBJECTIVES_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "msde/array.h"
#include "msde/autodiff.h"
#include "msde/moldata.h"
#include "msde/optim.h"
#include "msde/random.h"
#include "msde/scorenets.h"

namespace msde {

struct LossWeights {
  double contrastive = 1.0;
  double conf = 1.0;  // 2D -> 3D
  double topo = 1.0;  // 3D -> 2D

  void validate() const;
};

// Per-item random streams. Every loss draws from
// derive_seed(derive_seed(batch.seed, item), stream) so that a term
// computed alone reproduces the same term inside total_loss.
enum LossStream : uint64_t {
  kStreamMask2d = 1,
  kStreamMask3d = 2,
  kStreamConf = 3,
  kStreamTopo = 4,
  kStreamContrastive = 5,
};

Rng item_rng(uint64_t batch_seed, uint64_t item, LossStream stream);

struct Batch {
  std::vector<MoleculePair> items;
  uint64_t seed = 0;
  double mask_ratio = 0.0;

  void validate() const;
};

/// lambda * sum((score - target)^2) / norm.
Var weighted_sq_error(Var score, const Array &target, double lambda,
                      double norm);

/// DSM term for one conformation with explicit noise. `x0` must be centered;
/// `noise` is projected to zero mean before use.
Var conformer_dsm_loss(ParamBinder &p, const Model &model,
                       const Molecule2D &topo, Var h2d, const Coords &x0,
                       const Coords &noise, double t);

/// DSM term for one diffused topology with explicit noise. Only the upper
/// triangle of `edge_noise` (n x n x 5) is used; it is mirrored so the
/// diffused tensor stays symmetric. Diagonal edge entries are held at zero.
Var topology_dsm_loss(ParamBinder &p, const Model &model, Var h3d,
                      const Coords &cond_coords, const Molecule2D &topo,
                      const Array &atom_noise, const Array &edge_noise,
                      double t);

// Mean over the batch of the per-item DSM terms, t ~ U(t_eps, 1).
Var loss_2d_to_3d(ParamBinder &p, const Model &model, const Batch &batch,
                  double t_eps = 1e-3);
Var loss_3d_to_2d(ParamBinder &p, const Model &model, const Batch &batch,
                  double t_eps = 1e-3);

/// mean softplus(-pos) + mean softplus(neg), i.e.
/// -mean log sigmoid(pos) - mean log(1 - sigmoid(neg)).
Var ebm_nce_from_logits(Var pos, Var neg);

/// EBM-NCE on pooled B x D representations. Negatives pair row i of z2d with
/// row (i + k) mod B of z3d for one random shift k in [1, B - 1].
Var ebm_nce_loss(Var z2d, Var z3d, Rng &rng);

Var contrastive_loss(ParamBinder &p, const Model &model, const Batch &batch);

struct LossVars {
  Var total;
  // Unset when the corresponding weight is zero.
  Var contrastive;
  Var conf;
  Var topo;
};

LossVars total_loss(ParamBinder &p, const Model &model, const Batch &batch,
                    const LossWeights &weights, double t_eps = 1e-3);

struct LossValues {
  double total = 0.0;
  double contrastive = 0.0;
  double conf = 0.0;
  double topo = 0.0;
};

struct LossEvaluation {
  LossValues values;
  NamedArrays grads;
};

LossEvaluation evaluate_loss(const Model &model, const Batch &batch,
                             const LossWeights &weights, double t_eps = 1e-3);

struct GradientCheckReport {
  int64_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]"
};

/// Compares reverse-mode gradients of total_loss to central differences on a
/// random `fraction` of scalar parameters (at least one per array).
/// Relative error is |a - n| / max(|a|, |n|, 1e-3).
GradientCheckReport gradient_check(const Model &model, const Batch &batch,
                                   const LossWeights &weights,
                                   double fraction, uint64_t seed,
                                   double step = 1e-5);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 8;
  // Stop after this many optimizer steps; 0 means no limit.
  int64_t max_steps = 0;
  double t_eps = 1e-3;
  double mask_ratio = 0.0;
  LossWeights weights;
  AdamConfig adam;
  uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  LossValues mean;
};

using EpochCallback = std::function<void(const EpochRecord &)>;

/// Shuffled minibatch Adam on total_loss. Deterministic per config seed.
/// A final batch of one molecule is dropped when the contrastive term is
/// active, since it has no negatives. Throws on a non-finite loss.
std::vector<EpochRecord> train(Model &model,
                               const std::vector<MoleculePair> &corpus,
                               const TrainConfig &config,
                               const EpochCallback &on_epoch = {});

void write_loss_csv(const std::filesystem::path &path,
                    const std::vector<EpochRecord> &curve);

} // namespace msde

#endif // MSDE_OBJECTIVES_H_
