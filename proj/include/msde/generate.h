//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_GENERATE_H_
#define MSDE_GENERATE_H_

#include <cstdint>
#include <vector>

#include "msde/moldata.h"
#include "msde/scorenets.h"
#include "msde/sde.h"

namespace msde {

struct SampleOptions {
  int corrector_steps = 1;
  double snr = 0.3;
  // Reverse-time steps; 0 uses the model's schedule.
  int steps = 0;
  FrameMode mode = FrameMode::kFull;
};

/// One centered conformation for `topo` by predictor-corrector sampling
/// with the conformation score.
Coords sample_conformation(const Model &model, const Molecule2D &topo,
                           const SampleOptions &opts, Rng &rng);

struct TopologySample {
  Molecule2D topo;
  // n x n continuous bond evidence from the final state: best bond channel
  // minus the no-bond channel. Symmetric; zero diagonal.
  Array bond_score;
};

/// Reverse-diffuses the atom one-hot matrix and the upper triangle of the
/// edge tensor jointly, then decodes by argmax and recomputes derived atom
/// features from the decoded bonds.
TopologySample sample_topology(const Model &model, const Molecule3D &geom,
                               const SampleOptions &opts, Rng &rng);

/// `k` conformations per input; sample (i, r) uses seed
/// derive_seed(seed, i, r). Output records keep the input id (or "mol<i>"
/// when empty) and topology.
std::vector<MoleculePair> sample_conformations(
    const Model &model, const std::vector<MoleculePair> &corpus, int k,
    const SampleOptions &opts, uint64_t seed);

/// One predicted topology per input; records keep the input geometry.
std::vector<MoleculePair> sample_topologies(
    const Model &model, const std::vector<MoleculePair> &corpus,
    const SampleOptions &opts, uint64_t seed,
    std::vector<Array> *bond_scores = nullptr);

/// Checks that every atom type and feature in `corpus` fits the model's
/// embedding tables.
void check_compatible(const Model &model,
                      const std::vector<MoleculePair> &corpus);

} // namespace msde

#endif // MSDE_GENERATE_H_
