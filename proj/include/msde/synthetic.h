//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_SYNTHETIC_H_
#define MSDE_SYNTHETIC_H_

#include <cstdint>
#include <vector>

#include "msde/moldata.h"

namespace msde {

constexpr double kSyntheticBondLength = 1.5;
constexpr double kSyntheticJitter = 0.05;

enum class SyntheticFamily { kChain, kBranched, kRing };

/// One planar toy molecule with 3 to 12 atoms. Geometry is fixed by the
/// topology (bond length 1.5, 120 degree zigzag chains, regular rings) plus
/// uniform jitter of at most 0.05 per atom. Coordinates are centered.
MoleculePair synthetic_molecule(SyntheticFamily family, uint64_t seed);

/// `n` molecules cycling through the three families, ids "mol<k>".
std::vector<MoleculePair> generate_synthetic(int n, uint64_t seed);

} // namespace msde

#endif // MSDE_SYNTHETIC_H_
