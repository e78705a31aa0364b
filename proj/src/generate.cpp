//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/generate.h"

#include <algorithm>

#include "msde/geom3d.h"
#include "msde/random.h"

namespace msde {
namespace {
  NoiseSchedule schedule_for(const Model &model, const SampleOptions &opts) {
    NoiseSchedule s = model.sched;
    if (opts.steps > 0)
      s.steps = opts.steps;
    return s;
  }

  PcOptions pc_options(const SampleOptions &opts) {
    PcOptions pc;
    pc.corrector_steps = opts.corrector_steps;
    pc.snr = opts.snr;
    return pc;
  }

  void center_rows(Array &x) {
    const int64_t n = x.rows();
    for (int k = 0; k < 3; ++k) {
      double m = 0.0;
      for (int64_t i = 0; i < n; ++i)
        m += x(i, k);
      m /= static_cast<double>(n);
      for (int64_t i = 0; i < n; ++i)
        x(i, k) -= m;
    }
  }
} // namespace

Coords sample_conformation(const Model &model, const Molecule2D &topo,
                           const SampleOptions &opts, Rng &rng) {
  topo.validate();
  const int64_t n = topo.num_atoms();
  const ConformerScorer scorer(model, topo, opts.mode);
  TimeScoreFn score = [&](const Array &x, double t) {
    Coords c(n, 3);
    for (int64_t i = 0; i < n; ++i)
      for (int k = 0; k < 3; ++k)
        c(i, k) = x(i, k);
    return scorer(c, t);
  };
  PcOptions pc = pc_options(opts);
  pc.project = center_rows;
  const Array x = pc_sample(score, schedule_for(model, opts), { n, 3 }, pc, rng);

  Coords out(n, 3);
  for (int64_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k)
      out(i, k) = x(i, k);
  return center_coordinates(out);
}

TopologySample sample_topology(const Model &model, const Molecule3D &geom,
                               const SampleOptions &opts, Rng &rng) {
  geom.validate();
  const int64_t n = geom.num_atoms();
  const int64_t a = kAtomOneHotWidth, w = kEdgeOneHotWidth;
  const int64_t pairs = n * (n - 1) / 2;
  const int64_t node_len = n * a;
  const TopologyScorer scorer(model, geom);

  auto unpack = [&](const Array &x, Array &atoms, Array &edges) {
    atoms = Array::matrix(n, a);
    std::copy(x.data(), x.data() + node_len, atoms.data());
    edges = Array({ n, n, w });
    const double *e = x.data() + node_len;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = i + 1; j < n; ++j, e += w)
        for (int64_t c = 0; c < w; ++c)
          edges[(i * n + j) * w + c] = edges[(j * n + i) * w + c] = e[c];
  };

  TimeScoreFn score = [&](const Array &x, double t) {
    Array atoms, edges;
    unpack(x, atoms, edges);
    const TopologyScore s = scorer(atoms, edges, t);
    Array out(x.shape());
    std::copy(s.node.data(), s.node.data() + node_len, out.data());
    double *e = out.data() + node_len;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = i + 1; j < n; ++j, e += w)
        for (int64_t c = 0; c < w; ++c)
          e[c] = s.edge[(i * n + j) * w + c];
    return out;
  };

  const Array x = pc_sample(score, schedule_for(model, opts),
                            { node_len + pairs * w, 1 }, pc_options(opts), rng);
  Array atoms, edges;
  unpack(x, atoms, edges);

  TopologySample out;
  out.topo.atoms.resize(n);
  for (int64_t i = 0; i < n; ++i) {
    // The mask-token column is never a valid prediction.
    int best = 0;
    for (int c = 1; c < kNumAtomTypes; ++c)
      if (atoms(i, c) > atoms(i, best))
        best = c;
    out.topo.atoms[i] = AtomFeatures {};
    out.topo.atoms[i][kAtomType] = kAtomFeatureRanges[kAtomType].min + best;
  }
  out.bond_score = Array::matrix(n, n);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j) {
      const double *e = edges.data() + (i * n + j) * w;
      const int64_t best = std::max_element(e, e + w) - e;
      const double s = *std::max_element(e + 1, e + w) - e[0];
      out.bond_score(i, j) = out.bond_score(j, i) = s;
      if (best > 0) {
        const int type = static_cast<int>(best) - 1;
        out.topo.bonds.push_back({ static_cast<int>(i), static_cast<int>(j),
                                   type, 0, type == 3 ? 1 : 0 });
      }
    }
  }
  recompute_derived_features(out.topo);
  return out;
}

void check_compatible(const Model &model,
                      const std::vector<MoleculePair> &corpus) {
  const int64_t type_rows =
      model.params.at("enc3d.type_emb").rows();
  for (size_t m = 0; m < corpus.size(); ++m) {
    const MoleculePair &mol = corpus[m];
    for (int a = 0; a < mol.num_atoms(); ++a) {
      const EncodedAtom enc = encode_atom(mol.topo.atoms[a]);
      for (int c = 0; c < kAtomColumnCount; ++c) {
        const int64_t rows =
            model.params.at("enc2d.atom_emb." + std::to_string(c)).rows();
        if (enc[c] >= rows)
          throw Error("molecule " + std::to_string(m) + " atom "
                      + std::to_string(a) + ": feature "
                      + kAtomFeatureRanges[c].name
                      + " exceeds the checkpoint embedding table ("
                      + std::to_string(rows) + " rows)");
      }
      if (mol.geom.atom_types[a] >= type_rows)
        throw Error("molecule " + std::to_string(m) + " atom "
                    + std::to_string(a)
                    + ": atom type exceeds the checkpoint embedding table");
    }
  }
}

std::vector<MoleculePair> sample_conformations(
    const Model &model, const std::vector<MoleculePair> &corpus, int k,
    const SampleOptions &opts, uint64_t seed) {
  if (k < 1)
    throw Error("sample_conformations: k must be positive");
  check_compatible(model, corpus);
  std::vector<MoleculePair> out;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const MoleculePair &src = corpus[i];
    for (int r = 0; r < k; ++r) {
      Rng rng(derive_seed(seed, i, r));
      MoleculePair m;
      m.id = src.id.empty() ? "mol" + std::to_string(i) : src.id;
      m.topo = src.topo;
      m.geom.atom_types = src.geom.atom_types;
      m.geom.coords = sample_conformation(model, src.topo, opts, rng);
      m.validate();
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<MoleculePair> sample_topologies(
    const Model &model, const std::vector<MoleculePair> &corpus,
    const SampleOptions &opts, uint64_t seed,
    std::vector<Array> *bond_scores) {
  check_compatible(model, corpus);
  std::vector<MoleculePair> out;
  for (size_t i = 0; i < corpus.size(); ++i) {
    const MoleculePair &src = corpus[i];
    Rng rng(derive_seed(seed, i));
    TopologySample s = sample_topology(model, src.geom, opts, rng);
    MoleculePair m;
    m.id = src.id.empty() ? "mol" + std::to_string(i) : src.id;
    m.topo = std::move(s.topo);
    m.geom = src.geom;
    // Predicted atom types replace the stored ones so the record stays
    // self-consistent.
    for (int a = 0; a < m.num_atoms(); ++a)
      m.geom.atom_types[a] = m.topo.atoms[a][kAtomType];
    if (bond_scores)
      bond_scores->push_back(std::move(s.bond_score));
    out.push_back(std::move(m));
  }
  return out;
}

} // namespace msde
