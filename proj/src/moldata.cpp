//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/moldata.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "msde/random.h"

namespace msde {

const std::array<FeatureRange, kAtomColumnCount> kAtomFeatureRanges { {
    { "atom_type", 0, 118 },
    { "chirality", 0, 3 },
    { "degree", 0, 10 },
    { "formal_charge", -5, 5 },
    { "num_hydrogens", 0, 8 },
    { "radical_electrons", 0, 4 },
    { "hybridization", 0, 4 },
    { "is_aromatic", 0, 1 },
    { "is_in_ring", 0, 1 },
} };

const std::array<FeatureRange, kBondColumnCount> kBondFeatureRanges { {
    { "bond_type", 0, 3 },
    { "bond_stereo", 0, 5 },
    { "is_conjugated", 0, 1 },
} };

namespace {
  [[noreturn]] void invalid(const std::string &msg) {
    throw ValidationError(msg);
  }

  void check_range(const FeatureRange &r, int v, const std::string &where) {
    if (v < r.min || v > r.max)
      invalid(where + "." + r.name + " = " + std::to_string(v) + " outside ["
              + std::to_string(r.min) + ", " + std::to_string(r.max) + "]");
  }

  std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    if (s.empty())
      return out;
    size_t start = 0;
    while (true) {
      const size_t pos = s.find(sep, start);
      if (pos == std::string_view::npos) {
        out.push_back(s.substr(start));
        break;
      }
      out.push_back(s.substr(start, pos - start));
      start = pos + 1;
    }
    return out;
  }

  int parse_int(std::string_view s, const std::string &where) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      invalid(where + ": expected integer, got '" + std::string(s) + "'");
    return v;
  }

  double parse_double(std::string_view s, const std::string &where) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      invalid(where + ": expected number, got '" + std::string(s) + "'");
    return v;
  }

  void append_double(std::string &out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, ptr);
  }

  // Valence used to derive implicit hydrogen counts.
  int nominal_valence(int atom_type) {
    switch (atom_type) {
    case 1:
      return 1;
    case 5:
      return 3;
    case 6:
      return 4;
    case 7:
      return 3;
    case 8:
      return 2;
    case 9:
    case 17:
    case 35:
    case 53:
      return 1;
    case 15:
      return 3;
    case 16:
      return 2;
    default:
      return 0;
    }
  }
} // namespace

void Molecule2D::validate() const {
  const int n = num_atoms();
  if (n < 1)
    invalid("molecule has no atoms");
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < kAtomColumnCount; ++c)
      check_range(kAtomFeatureRanges[c], atoms[a][c],
                  "atoms[" + std::to_string(a) + "]");

  std::set<std::pair<int, int>> seen;
  for (size_t b = 0; b < bonds.size(); ++b) {
    const Bond &bd = bonds[b];
    const std::string where = "bonds[" + std::to_string(b) + "]";
    if (bd.i < 0 || bd.i >= n || bd.j < 0 || bd.j >= n)
      invalid(where + ": endpoint (" + std::to_string(bd.i) + ", "
              + std::to_string(bd.j) + ") outside " + std::to_string(n)
              + " atoms");
    if (bd.i == bd.j)
      invalid(where + ": self-bond on atom " + std::to_string(bd.i));
    if (!seen.emplace(std::min(bd.i, bd.j), std::max(bd.i, bd.j)).second)
      invalid(where + ": duplicate bond (" + std::to_string(bd.i) + ", "
              + std::to_string(bd.j) + ")");
    check_range(kBondFeatureRanges[kBondType], bd.type, where);
    check_range(kBondFeatureRanges[kBondStereo], bd.stereo, where);
    check_range(kBondFeatureRanges[kIsConjugated], bd.conjugated, where);
  }
}

void Molecule3D::validate() const {
  const int n = num_atoms();
  if (n < 1)
    invalid("geometry has no atoms");
  if (coords.rows() != n)
    invalid("coords: " + std::to_string(coords.rows()) + " rows for "
            + std::to_string(n) + " atoms");
  for (int a = 0; a < n; ++a) {
    check_range(kAtomFeatureRanges[kAtomType], atom_types[a],
                "atoms[" + std::to_string(a) + "]");
    if (!coords.row(a).allFinite())
      invalid("coords[" + std::to_string(a) + "]: non-finite value");
  }
}

void MoleculePair::validate() const {
  topo.validate();
  geom.validate();
  if (topo.num_atoms() != geom.num_atoms())
    invalid("atom count mismatch: topology has "
            + std::to_string(topo.num_atoms()) + ", geometry "
            + std::to_string(geom.num_atoms()));
  for (int a = 0; a < topo.num_atoms(); ++a)
    if (topo.atoms[a][kAtomType] != geom.atom_types[a])
      invalid("atoms[" + std::to_string(a)
              + "].atom_type disagrees between topology and geometry");
}

MoleculePair parse_molecule(std::string_view record) {
  while (!record.empty()
         && (record.back() == '\n' || record.back() == '\r'
             || record.back() == ' '))
    record.remove_suffix(1);

  MoleculePair pair;
  int n = -1;
  bool have_atoms = false, have_coords = false;
  std::vector<std::string_view> atom_items, bond_items, coord_items;

  for (std::string_view field: split(record, ' ')) {
    if (field.empty())
      continue;
    const size_t eq = field.find('=');
    if (eq == std::string_view::npos)
      invalid("malformed field '" + std::string(field) + "'");
    const std::string_view key = field.substr(0, eq);
    const std::string_view val = field.substr(eq + 1);
    if (key == "id") {
      pair.id = std::string(val);
    } else if (key == "n") {
      n = parse_int(val, "n");
    } else if (key == "atoms") {
      atom_items = split(val, ';');
      have_atoms = true;
    } else if (key == "bonds") {
      bond_items = split(val, ';');
    } else if (key == "coords") {
      coord_items = split(val, ';');
      have_coords = true;
    } else {
      invalid("unknown field '" + std::string(key) + "'");
    }
  }

  if (n < 1)
    invalid("n: missing or non-positive atom count");
  if (!have_atoms || !have_coords)
    invalid("record requires atoms= and coords= fields");
  if (static_cast<int>(atom_items.size()) != n)
    invalid("atoms: " + std::to_string(atom_items.size())
            + " entries for n = " + std::to_string(n));
  if (static_cast<int>(coord_items.size()) != n)
    invalid("coords: " + std::to_string(coord_items.size())
            + " entries for n = " + std::to_string(n));

  pair.topo.atoms.resize(n);
  for (int a = 0; a < n; ++a) {
    const std::string where = "atoms[" + std::to_string(a) + "]";
    auto cols = split(atom_items[a], ',');
    if (static_cast<int>(cols.size()) != kAtomColumnCount)
      invalid(where + ": expected " + std::to_string(kAtomColumnCount)
              + " columns");
    for (int c = 0; c < kAtomColumnCount; ++c)
      pair.topo.atoms[a][c] = parse_int(cols[c], where);
  }

  for (size_t b = 0; b < bond_items.size(); ++b) {
    const std::string where = "bonds[" + std::to_string(b) + "]";
    auto cols = split(bond_items[b], ',');
    if (cols.size() != 5)
      invalid(where + ": expected i,j,type,stereo,conjugated");
    Bond bd;
    bd.i = parse_int(cols[0], where);
    bd.j = parse_int(cols[1], where);
    bd.type = parse_int(cols[2], where);
    bd.stereo = parse_int(cols[3], where);
    bd.conjugated = parse_int(cols[4], where);
    pair.topo.bonds.push_back(bd);
  }

  pair.geom.coords.resize(n, 3);
  pair.geom.atom_types.resize(n);
  for (int a = 0; a < n; ++a) {
    const std::string where = "coords[" + std::to_string(a) + "]";
    auto cols = split(coord_items[a], ',');
    if (cols.size() != 3)
      invalid(where + ": expected x,y,z");
    for (int k = 0; k < 3; ++k)
      pair.geom.coords(a, k) = parse_double(cols[k], where);
    pair.geom.atom_types[a] = pair.topo.atoms[a][kAtomType];
  }

  pair.validate();
  return pair;
}

std::string serialize_molecule(const MoleculePair &pair) {
  std::string out;
  if (!pair.id.empty()) {
    out += "id=";
    out += pair.id;
    out += ' ';
  }
  const int n = pair.num_atoms();
  out += "n=" + std::to_string(n) + " atoms=";
  for (int a = 0; a < n; ++a) {
    if (a > 0)
      out += ';';
    for (int c = 0; c < kAtomColumnCount; ++c) {
      if (c > 0)
        out += ',';
      out += std::to_string(pair.topo.atoms[a][c]);
    }
  }
  out += " bonds=";
  for (size_t b = 0; b < pair.topo.bonds.size(); ++b) {
    const Bond &bd = pair.topo.bonds[b];
    if (b > 0)
      out += ';';
    out += std::to_string(bd.i) + ',' + std::to_string(bd.j) + ','
           + std::to_string(bd.type) + ',' + std::to_string(bd.stereo) + ','
           + std::to_string(bd.conjugated);
  }
  out += " coords=";
  for (int a = 0; a < n; ++a) {
    if (a > 0)
      out += ';';
    for (int k = 0; k < 3; ++k) {
      if (k > 0)
        out += ',';
      append_double(out, pair.geom.coords(a, k));
    }
  }
  return out;
}

std::vector<MoleculePair> read_corpus(const std::filesystem::path &path) {
  std::ifstream is(path);
  if (!is)
    throw Error("cannot open corpus " + path.string());
  std::vector<MoleculePair> corpus;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#')
      continue;
    try {
      corpus.push_back(parse_molecule(line));
    } catch (const ValidationError &e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno)
                            + ": " + e.what());
    }
  }
  return corpus;
}

void write_corpus(const std::filesystem::path &path,
                  const std::vector<MoleculePair> &corpus) {
  std::ofstream os(path, std::ios::trunc);
  if (!os)
    throw Error("cannot open " + path.string() + " for writing");
  for (const auto &pair: corpus)
    os << serialize_molecule(pair) << '\n';
  if (!os)
    throw Error("failed writing " + path.string());
}

EncodedAtom encode_atom(const AtomFeatures &atom) {
  EncodedAtom enc;
  for (int c = 0; c < kAtomColumnCount; ++c)
    enc[c] = atom[c] - kAtomFeatureRanges[c].min;
  return enc;
}

int mask_count(double ratio, int n) {
  if (!(ratio >= 0.0 && ratio < 1.0))
    throw Error("mask ratio must lie in [0, 1)");
  return static_cast<int>(std::floor(ratio * n + 0.5));
}

std::vector<int> select_masked(int n, const MaskSpec &spec) {
  const int k = mask_count(spec.ratio, n);
  if (k == 0)
    return {};
  // Partial Fisher-Yates: the first k slots form a uniform sample.
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i)
    perm[i] = i;
  Rng rng(spec.seed);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(uniform_index(rng, n - i));
    std::swap(perm[i], perm[j]);
  }
  std::vector<int> out(perm.begin(), perm.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

MaskedTopology apply_mask(const Molecule2D &mol, const MaskSpec &spec) {
  MaskedTopology out;
  out.atoms.reserve(mol.atoms.size());
  for (const auto &atom: mol.atoms)
    out.atoms.push_back(encode_atom(atom));
  out.bonds = mol.bonds;
  out.masked = select_masked(mol.num_atoms(), spec);
  for (int a: out.masked)
    for (int c = 0; c < kAtomColumnCount; ++c)
      out.atoms[a][c] = kAtomFeatureRanges[c].mask_token();
  return out;
}

MaskedGeometry apply_mask(const Molecule3D &mol, const MaskSpec &spec) {
  MaskedGeometry out;
  out.atom_types = mol.atom_types;
  out.coords = mol.coords;
  out.masked = select_masked(mol.num_atoms(), spec);
  for (int a: out.masked)
    out.atom_types[a] = kAtomFeatureRanges[kAtomType].mask_token();
  return out;
}

Array to_dense_edge_tensor(const Molecule2D &mol) {
  const int n = mol.num_atoms();
  Array e({ n, n, kEdgeOneHotWidth });
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      e[(i * n + j) * kEdgeOneHotWidth] = 1.0;
  for (const Bond &bd: mol.bonds) {
    for (auto [a, b]: { std::pair { bd.i, bd.j }, std::pair { bd.j, bd.i } }) {
      double *slot = e.data() + (a * n + b) * kEdgeOneHotWidth;
      slot[0] = 0.0;
      slot[1 + bd.type] = 1.0;
    }
  }
  return e;
}

std::vector<std::vector<int>> shortest_paths(const Molecule2D &mol) {
  const int n = mol.num_atoms();
  std::vector<std::vector<int>> adj(n);
  for (const Bond &bd: mol.bonds) {
    adj[bd.i].push_back(bd.j);
    adj[bd.j].push_back(bd.i);
  }
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (int s = 0; s < n; ++s) {
    std::queue<int> q;
    dist[s][s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v: adj[u]) {
        if (dist[s][v] < 0) {
          dist[s][v] = dist[s][u] + 1;
          q.push(v);
        }
      }
    }
  }
  return dist;
}

void recompute_derived_features(Molecule2D &mol) {
  const int n = mol.num_atoms();
  std::vector<int> degree(n, 0);
  std::vector<double> order_sum(n, 0.0);
  std::vector<int> aromatic(n, 0), has_double(n, 0), has_triple(n, 0);
  std::vector<int> in_ring(n, 0);

  for (size_t b = 0; b < mol.bonds.size(); ++b) {
    const Bond &bd = mol.bonds[b];
    static constexpr double kOrder[] = { 1.0, 2.0, 3.0, 1.5 };
    for (int a: { bd.i, bd.j }) {
      ++degree[a];
      order_sum[a] += kOrder[bd.type];
      aromatic[a] |= bd.type == 3;
      has_double[a] |= bd.type == 1;
      has_triple[a] |= bd.type == 2;
    }

    // A bond lies on a ring iff its endpoints stay connected without it.
    std::vector<int> seen(n, 0);
    std::queue<int> q;
    q.push(bd.i);
    seen[bd.i] = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (size_t c = 0; c < mol.bonds.size(); ++c) {
        if (c == b)
          continue;
        const Bond &o = mol.bonds[c];
        int v = -1;
        if (o.i == u)
          v = o.j;
        else if (o.j == u)
          v = o.i;
        if (v >= 0 && !seen[v]) {
          seen[v] = 1;
          q.push(v);
        }
      }
    }
    if (seen[bd.j])
      in_ring[bd.i] = in_ring[bd.j] = 1;
  }

  for (int a = 0; a < n; ++a) {
    AtomFeatures &atom = mol.atoms[a];
    atom[kDegree] = std::min(degree[a], 10);
    const int valence = nominal_valence(atom[kAtomType]);
    const int h = static_cast<int>(std::floor(valence - order_sum[a] + 1e-9));
    atom[kNumHydrogens] = std::clamp(h, 0, 8);
    atom[kIsAromatic] = aromatic[a];
    atom[kIsInRing] = in_ring[a];
    if (has_triple[a])
      atom[kHybridization] = 0;
    else if (aromatic[a] || has_double[a])
      atom[kHybridization] = 1;
    else
      atom[kHybridization] = 2;
  }
}

Molecule2D permute_atoms(const Molecule2D &mol, const std::vector<int> &perm) {
  const int n = mol.num_atoms();
  std::vector<int> inv(n);
  for (int k = 0; k < n; ++k)
    inv[perm[k]] = k;
  Molecule2D out;
  out.atoms.resize(n);
  for (int k = 0; k < n; ++k)
    out.atoms[k] = mol.atoms[perm[k]];
  out.bonds = mol.bonds;
  for (Bond &bd: out.bonds) {
    bd.i = inv[bd.i];
    bd.j = inv[bd.j];
  }
  return out;
}

Molecule3D permute_atoms(const Molecule3D &mol, const std::vector<int> &perm) {
  const int n = mol.num_atoms();
  Molecule3D out;
  out.atom_types.resize(n);
  out.coords.resize(n, 3);
  for (int k = 0; k < n; ++k) {
    out.atom_types[k] = mol.atom_types[perm[k]];
    out.coords.row(k) = mol.coords.row(perm[k]);
  }
  return out;
}

} // namespace msde
