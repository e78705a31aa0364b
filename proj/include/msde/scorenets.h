//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_SCORENETS_H_
#define MSDE_SCORENETS_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "msde/array.h"
#include "msde/autodiff.h"
#include "msde/geom3d.h"
#include "msde/moldata.h"
#include "msde/sde.h"

namespace msde {

// Test hook for the conformation score network. kDropPseudoAxis discards
// the e2 (pseudo-vector) component when turning edge scalars into vectors,
// which makes the network mirror-symmetric.
enum class FrameMode { kFull, kDropPseudoAxis };

struct ModelConfig {
  int width = 64;
  int encoder_layers = 3;
  int attention_layers = 2;
  int gcn_layers = 3;
  int time_freqs = 16;
  RbfSpec rbf;
  // Pairs closer than this on the diffused geometry become score edges, in
  // addition to all bonded pairs.
  double edge_cutoff = 5.0;
  // Neighbor cutoff for the 3D encoder.
  double encoder_cutoff = 5.0;

  void validate() const;
  bool operator==(const ModelConfig &) const = default;
};

// Bond-type one-hot (4 types + none) and hop distance one-hot
// (1, 2, 3, 4, 5+, disconnected).
constexpr int kPairTopologyWidth = kEdgeOneHotWidth + 6;
// Projections of r_i - r_j, r_i and r_j onto the edge frame.
constexpr int kFrameFeatureWidth = 9;
// Typical coordinate spread, used to normalize frame projections.
constexpr double kCoordScale = 2.0;

using ShapeTable = std::map<std::string, Shape>;

/// Name -> shape of every learned array. Prefixes: enc2d., enc3d., s23.,
/// s32., proj2d., proj3d.
ShapeTable param_shapes(const ModelConfig &cfg);

/// Deterministic initialization; each array draws from its own stream keyed
/// by (seed, name).
NamedArrays init_params(const ModelConfig &cfg, uint64_t seed);

/// Binds named parameters into a graph on first use.
class ParamBinder {
public:
  ParamBinder(DiffGraph &graph, const NamedArrays &params)
      : graph_(graph), params_(params) { }

  DiffGraph &graph() { return graph_; }
  Var operator()(const std::string &name);

private:
  DiffGraph &graph_;
  const NamedArrays &params_;
  std::unordered_map<std::string, Var> bound_;
};

Var encode_2d(ParamBinder &p, const ModelConfig &cfg,
              const MaskedTopology &mol);

Var encode_3d(ParamBinder &p, const ModelConfig &cfg,
              const MaskedGeometry &mol);

/// Per-edge constants for the conformation score network, built from the
/// topology and the diffused (centered) coordinates.
struct ConformerEdges {
  std::vector<int64_t> src;
  std::vector<int64_t> dst;
  std::array<Array, 3> axes;  // E x 3 frame axis k per edge; zero if degenerate
  Array frame_features;       // E x kFrameFeatureWidth
  Array rbf;                  // E x K
  Array topology;             // E x kPairTopologyWidth
  int degenerate = 0;

  int64_t size() const { return static_cast<int64_t>(src.size()); }
};

ConformerEdges build_conformer_edges(const Molecule2D &topo,
                                     const Coords &coords,
                                     const ModelConfig &cfg);

/// SE(3)-equivariant conformation score. `h2d` is the n x D output of
/// encode_2d; coordinates must be centered. Returns n x 3.
Var score_2d_to_3d(ParamBinder &p, const ModelConfig &cfg,
                   const Molecule2D &topo, Var h2d, const Coords &coords,
                   double t, const PerturbKernel &kernel,
                   FrameMode mode = FrameMode::kFull);

struct TopologyScoreVars {
  Var node;  // n x kAtomOneHotWidth
  Var edge;  // (n*n) x kEdgeOneHotWidth, row i*n + j; symmetric in (i, j)
};

/// SE(3)-invariant topology score. `h3d` is the n x D output of encode_3d on
/// the conditioning geometry, whose pairwise distances also feed the edge
/// head. `edges` is n x n x kEdgeOneHotWidth and must be symmetric.
TopologyScoreVars score_3d_to_2d(ParamBinder &p, const ModelConfig &cfg,
                                 Var h3d, const Coords &cond_coords,
                                 const Array &atoms_t, const Array &edges_t,
                                 double t, const PerturbKernel &kernel);

// Graph-level pooled representations passed through a projection head.
Var project_2d(ParamBinder &p, Var h2d);
Var project_3d(ParamBinder &p, Var h3d);

/// Parameters plus the settings needed to evaluate them.
struct Model {
  ModelConfig config;
  NoiseSchedule sched;
  NamedArrays params;
};

Model make_model(const ModelConfig &cfg, const NoiseSchedule &sched,
                 uint64_t seed);

/// Checkpoint record set: learned arrays plus meta.* scalars describing the
/// architecture and schedule.
NamedArrays model_to_arrays(const Model &model);
Model model_from_arrays(const NamedArrays &arrays);

/// Evaluates the conformation score outside of training (no masking).
Array conformer_score(const Model &model, const Molecule2D &topo,
                      const Coords &coords, double t,
                      FrameMode mode = FrameMode::kFull);

/// Reuses a precomputed 2D encoding across many score evaluations.
class ConformerScorer {
public:
  ConformerScorer(const Model &model, const Molecule2D &topo,
                  FrameMode mode = FrameMode::kFull);
  Array operator()(const Coords &coords, double t) const;

private:
  const Model &model_;
  const Molecule2D &topo_;
  Array h2d_;
  FrameMode mode_;
};

struct TopologyScore {
  Array node;  // n x kAtomOneHotWidth
  Array edge;  // n x n x kEdgeOneHotWidth
};

class TopologyScorer {
public:
  TopologyScorer(const Model &model, const Molecule3D &geom);
  TopologyScore operator()(const Array &atoms_t, const Array &edges_t,
                           double t) const;

private:
  const Model &model_;
  Coords coords_;
  Array h3d_;
};

enum class SymmetryKind { kRotation, kReflection, kPermutation, kTranslation };
enum class ScoreNet { kConformation, kTopology };

const char *to_string(SymmetryKind k);
const char *to_string(ScoreNet n);

struct SymmetryReport {
  SymmetryKind kind;
  ScoreNet net;
  int trials = 0;
  bool applicable = true;
  double max_deviation = 0.0;
  double min_deviation = 0.0;
  // Fraction of trials meeting the per-trial criterion.
  double pass_fraction = 0.0;
  bool passed = false;
};

/// Randomized symmetry check against molecules drawn from `molecules`
/// (cycled), perturbed with seeded noise to make inputs generic.
///  rotation:    max |S(Qx) - Q S(x)| < tol (conformation), or
///               max |S(x | Q y + v) - S(x | y)| < tol (topology)
///  reflection:  |S(rho x) - rho S(x)| / |S(x)| > tol on >= 95% of trials
///  permutation: max |S(Px) - P S(x)| < tol
///  translation: max |S(center(x + v)) - S(center(x))| < tol
SymmetryReport check_symmetry(SymmetryKind kind, ScoreNet net,
                              const Model &model,
                              std::span<const MoleculePair> molecules,
                              int trials, double tol, uint64_t seed,
                              FrameMode mode = FrameMode::kFull);

} // namespace msde

#endif // MSDE_SCORENETS_H_
