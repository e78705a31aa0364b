//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_MOLDATA_H_
#define MSDE_MOLDATA_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "msde/array.h"

namespace msde {

class ValidationError: public Error {
public:
  using Error::Error;
};

// Categorical atom columns, in storage order.
enum AtomColumn : int {
  kAtomType,
  kChirality,
  kDegree,
  kFormalCharge,
  kNumHydrogens,
  kRadicalElectrons,
  kHybridization,
  kIsAromatic,
  kIsInRing,
  kAtomColumnCount,
};

enum BondColumn : int {
  kBondType,
  kBondStereo,
  kIsConjugated,
  kBondColumnCount,
};

struct FeatureRange {
  const char *name;
  int min;
  int max;

  int size() const { return max - min + 1; }
  // Encoded index of the mask token; one past the last valid index.
  int mask_token() const { return size(); }
};

extern const std::array<FeatureRange, kAtomColumnCount> kAtomFeatureRanges;
extern const std::array<FeatureRange, kBondColumnCount> kBondFeatureRanges;

constexpr int kNumAtomTypes = 119;
// Atom-type one-hot width: 119 element types plus the mask token.
constexpr int kAtomOneHotWidth = kNumAtomTypes + 1;
// Edge one-hot: channel 0 is "no bond", channels 1..4 the bond types.
constexpr int kEdgeOneHotWidth = 5;

using AtomFeatures = std::array<int, kAtomColumnCount>;
// Encoded (zero-based, possibly mask-token) atom feature indices.
using EncodedAtom = std::array<int, kAtomColumnCount>;

struct Bond {
  int i = 0;
  int j = 0;
  int type = 0;
  int stereo = 0;
  int conjugated = 0;

  bool operator==(const Bond &) const = default;
};

using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct Molecule2D {
  std::vector<AtomFeatures> atoms;
  std::vector<Bond> bonds;

  int num_atoms() const { return static_cast<int>(atoms.size()); }
  void validate() const;
  bool operator==(const Molecule2D &) const = default;
};

struct Molecule3D {
  std::vector<int> atom_types;
  Coords coords;

  int num_atoms() const { return static_cast<int>(atom_types.size()); }
  void validate() const;
  bool operator==(const Molecule3D &other) const {
    return atom_types == other.atom_types
           && coords.rows() == other.coords.rows()
           && coords == other.coords;
  }
};

struct MoleculePair {
  std::string id;
  Molecule2D topo;
  Molecule3D geom;

  int num_atoms() const { return topo.num_atoms(); }
  void validate() const;
  bool operator==(const MoleculePair &) const = default;
};

struct MaskSpec {
  double ratio = 0.0;
  uint64_t seed = 0;
};

struct MaskedTopology {
  std::vector<EncodedAtom> atoms;
  std::vector<Bond> bonds;
  std::vector<int> masked;
};

struct MaskedGeometry {
  std::vector<int> atom_types;  // encoded; kNumAtomTypes is the mask token
  Coords coords;
  std::vector<int> masked;
};

/// Parses one corpus line. Throws ValidationError naming the offending
/// field and index.
MoleculePair parse_molecule(std::string_view record);
std::string serialize_molecule(const MoleculePair &pair);

std::vector<MoleculePair> read_corpus(const std::filesystem::path &path);
void write_corpus(const std::filesystem::path &path,
                  const std::vector<MoleculePair> &corpus);

EncodedAtom encode_atom(const AtomFeatures &atom);

// Number of atoms masked for ratio M on n atoms: round half up.
int mask_count(double ratio, int n);
std::vector<int> select_masked(int n, const MaskSpec &spec);

MaskedTopology apply_mask(const Molecule2D &mol, const MaskSpec &spec);
MaskedGeometry apply_mask(const Molecule3D &mol, const MaskSpec &spec);

/// n x n x kEdgeOneHotWidth one-hot bond tensor, symmetric in (i, j).
Array to_dense_edge_tensor(const Molecule2D &mol);

/// All-pairs shortest path lengths in bonds; -1 for disconnected pairs.
std::vector<std::vector<int>> shortest_paths(const Molecule2D &mol);

/// Recomputes degree, hydrogen count, ring membership and aromaticity from
/// the bond list. Used when bonds are decoded rather than read.
void recompute_derived_features(Molecule2D &mol);

Molecule2D permute_atoms(const Molecule2D &mol, const std::vector<int> &perm);
Molecule3D permute_atoms(const Molecule3D &mol, const std::vector<int> &perm);

} // namespace msde

#endif // MSDE_MOLDATA_H_
