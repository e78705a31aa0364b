//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/synthetic.h"

#include <cmath>
#include <numbers>

#include "msde/geom3d.h"
#include "msde/random.h"

namespace msde {
namespace {
  constexpr int kCarbon = 6, kNitrogen = 7, kOxygen = 8;

  struct Draft {
    std::vector<Vec3> pos;
    std::vector<Bond> bonds;
    std::vector<int> ring_atoms;
  };

  void add_bond(Draft &d, int i, int j, int type = 0) {
    d.bonds.push_back({ i, j, type, 0, type == 3 ? 1 : 0 });
  }

  // All-trans zigzag in the xy plane; even atoms low, odd atoms high.
  void zigzag(Draft &d, int len) {
    const double dx = kSyntheticBondLength * std::cos(std::numbers::pi / 6);
    const double dy = kSyntheticBondLength * 0.5;
    for (int k = 0; k < len; ++k) {
      d.pos.emplace_back(k * dx, (k % 2) * dy, 0.0);
      if (k > 0)
        add_bond(d, k - 1, k);
    }
  }

  Draft chain(Rng &rng) {
    Draft d;
    zigzag(d, 3 + static_cast<int>(uniform_index(rng, 10)));
    return d;
  }

  Draft branched(Rng &rng) {
    Draft d;
    const int len = 3 + static_cast<int>(uniform_index(rng, 8));
    zigzag(d, len);
    const int max_branches = std::min(len - 2, 12 - len);
    const int branches = 1 + static_cast<int>(uniform_index(rng, max_branches));
    // Pick distinct interior atoms.
    std::vector<int> interior;
    for (int k = 1; k + 1 < len; ++k)
      interior.push_back(k);
    for (int b = 0; b < branches; ++b) {
      const size_t pick = b + uniform_index(rng, interior.size() - b);
      std::swap(interior[b], interior[pick]);
      const int k = interior[b];
      // The third direction at a zigzag vertex points away from both
      // neighbors: straight down for low atoms, straight up for high ones.
      const Vec3 &a = d.pos[k];
      const double dir = k % 2 == 0 ? -1.0 : 1.0;
      d.pos.emplace_back(a.x(), a.y() + dir * kSyntheticBondLength, 0.0);
      add_bond(d, k, static_cast<int>(d.pos.size()) - 1);
    }
    return d;
  }

  Draft ring(Rng &rng) {
    Draft d;
    const int m = uniform_index(rng, 2) == 0 ? 5 : 6;
    const int type = m == 6 ? 3 : 0;
    const double radius =
        kSyntheticBondLength / (2.0 * std::sin(std::numbers::pi / m));
    for (int k = 0; k < m; ++k) {
      const double a = 2.0 * std::numbers::pi * k / m;
      d.pos.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
      add_bond(d, k, (k + 1) % m, type);
      d.ring_atoms.push_back(k);
    }
    const int subs = static_cast<int>(uniform_index(rng, 4));
    std::vector<int> slots(m);
    for (int k = 0; k < m; ++k)
      slots[k] = k;
    for (int s = 0; s < subs; ++s) {
      const size_t pick = s + uniform_index(rng, m - s);
      std::swap(slots[s], slots[pick]);
      const Vec3 &a = d.pos[slots[s]];
      d.pos.push_back(a * ((radius + kSyntheticBondLength) / radius));
      add_bond(d, slots[s], static_cast<int>(d.pos.size()) - 1);
    }
    return d;
  }
} // namespace

MoleculePair synthetic_molecule(SyntheticFamily family, uint64_t seed) {
  Rng rng(seed);
  Draft d = family == SyntheticFamily::kChain      ? chain(rng)
            : family == SyntheticFamily::kBranched ? branched(rng)
                                                   : ring(rng);
  const int n = static_cast<int>(d.pos.size());

  std::vector<int> degree(n, 0);
  std::vector<int> aromatic(n, 0);
  for (const Bond &b: d.bonds) {
    ++degree[b.i];
    ++degree[b.j];
    if (b.type == 3)
      aromatic[b.i] = aromatic[b.j] = 1;
  }

  MoleculePair out;
  out.topo.atoms.resize(n);
  out.topo.bonds = d.bonds;
  out.geom.atom_types.resize(n);
  out.geom.coords.resize(n, 3);
  const double j = kSyntheticJitter / std::sqrt(3.0);
  for (int a = 0; a < n; ++a) {
    // Heteroatoms only where their valence allows.
    int type = kCarbon;
    const uint64_t roll = uniform_index(rng, 10);
    if (roll >= 8 && degree[a] <= 2 && !aromatic[a])
      type = kOxygen;
    else if (roll >= 6 && degree[a] <= 3)
      type = kNitrogen;
    out.topo.atoms[a] = AtomFeatures {};
    out.topo.atoms[a][kAtomType] = type;
    out.geom.atom_types[a] = type;
    for (int c = 0; c < 3; ++c)
      out.geom.coords(a, c) = d.pos[a][c] + uniform_real(rng, -j, j);
  }
  recompute_derived_features(out.topo);
  out.geom.coords = center_coordinates(out.geom.coords);
  out.validate();
  return out;
}

std::vector<MoleculePair> generate_synthetic(int n, uint64_t seed) {
  if (n < 1)
    throw Error("generate_synthetic: need at least one molecule");
  static constexpr SyntheticFamily kCycle[] = { SyntheticFamily::kChain,
                                                SyntheticFamily::kBranched,
                                                SyntheticFamily::kRing };
  std::vector<MoleculePair> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    MoleculePair m =
        synthetic_molecule(kCycle[k % 3], derive_seed(seed, 0x5959, k));
    m.id = "mol" + std::to_string(k);
    out.push_back(std::move(m));
  }
  return out;
}

} // namespace msde
