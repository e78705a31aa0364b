//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/scorenets.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "msde/random.h"

namespace msde {
namespace {
  const double kLn2 = std::numbers::ln2;

  // Shifted softplus, smooth everywhere so finite-difference checks stay
  // meaningful through the whole network.
  Var act(Var x) {
    DiffGraph &g = *x.graph;
    return g.add(g.softplus(x), g.scalar(-kLn2));
  }

  Var linear(ParamBinder &p, const std::string &prefix, Var x,
             bool bias = true) {
    Var y = p.graph().matmul(x, p(prefix + ".w"));
    return bias ? y + p(prefix + ".b") : y;
  }

  Var mlp(ParamBinder &p, const std::string &prefix, Var x) {
    return linear(p, prefix + ".1", act(linear(p, prefix + ".0", x)));
  }

  Array time_features(double t, int freqs) {
    Array f = Array::matrix(1, 2 * freqs);
    for (int k = 0; k < freqs; ++k) {
      const double w = std::exp(-std::log(1e4) * k / freqs);
      f[k] = std::sin(1000.0 * t * w);
      f[freqs + k] = std::cos(1000.0 * t * w);
    }
    return f;
  }

  Var time_embed(ParamBinder &p, const std::string &prefix, double t,
                 int freqs) {
    return mlp(p, prefix, p.graph().constant(time_features(t, freqs)));
  }

  double input_scale(const PerturbKernel &k, double data_std) {
    return 1.0 / std::sqrt(k.mean_coef * k.mean_coef * data_std * data_std
                           + k.std * k.std);
  }

  Var as_index_gather(ParamBinder &p, const std::string &table,
                      std::vector<int64_t> idx) {
    Var tab = p(table);
    for (int64_t i: idx)
      if (i < 0 || i >= tab.value().rows())
        throw Error("feature index " + std::to_string(i)
                    + " outside embedding table '" + table + "' of "
                    + std::to_string(tab.value().rows()) + " rows");
    return p.graph().gather_rows(tab, make_index(std::move(idx)));
  }

  std::string layer_name(const std::string &prefix, int l) {
    return prefix + std::to_string(l);
  }
} // namespace

void ModelConfig::validate() const {
  if (width < 1 || encoder_layers < 1 || attention_layers < 0
      || gcn_layers < 0 || time_freqs < 1)
    throw Error("model: invalid layer/width settings");
  rbf.validate();
  if (!(edge_cutoff > 0) || !(encoder_cutoff > 0))
    throw Error("model: cutoffs must be positive");
}

ShapeTable param_shapes(const ModelConfig &cfg) {
  const int64_t d = cfg.width;
  const int64_t k = cfg.rbf.centers;
  const int64_t tf = 2 * cfg.time_freqs;
  ShapeTable t;

  auto lin = [&](const std::string &prefix, int64_t in, int64_t out,
                 bool bias = true) {
    t[prefix + ".w"] = { in, out };
    if (bias)
      t[prefix + ".b"] = { 1, out };
  };
  auto mlp2 = [&](const std::string &prefix, int64_t in, int64_t hidden,
                  int64_t out) {
    lin(prefix + ".0", in, hidden);
    lin(prefix + ".1", hidden, out);
  };

  for (int c = 0; c < kAtomColumnCount; ++c)
    t["enc2d.atom_emb." + std::to_string(c)] = {
      kAtomFeatureRanges[c].size() + 1, d
    };
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string pre = layer_name("enc2d.layer", l);
    for (int c = 0; c < kBondColumnCount; ++c)
      t[pre + ".bond_emb." + std::to_string(c)] = {
        kBondFeatureRanges[c].size(), d
      };
    mlp2(pre + ".mlp", d, d, d);
  }

  t["enc3d.type_emb"] = { kAtomOneHotWidth, d };
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string pre = layer_name("enc3d.layer", l);
    mlp2(pre + ".filter", k, d, d);
    lin(pre + ".in", d, d, false);
    mlp2(pre + ".out", d, d, d);
  }

  mlp2("s23.time", tf, d, d);
  mlp2("s23.pair", 2 * d + kPairTopologyWidth, d, d);
  lin("s23.rbf", k, d, false);
  lin("s23.frame", kFrameFeatureWidth, d);
  for (int a = 0; a < cfg.attention_layers; ++a) {
    const std::string pre = layer_name("s23.attn", a);
    lin(pre + ".q", d, d, false);
    lin(pre + ".k", d, d, false);
    lin(pre + ".v", d, d, false);
    lin(pre + ".out", d, d);
  }
  mlp2("s23.head", d, d, 3);

  const int64_t g = cfg.gcn_layers;
  mlp2("s32.time", tf, d, d);
  mlp2("s32.xin", kAtomOneHotWidth, d, d);
  for (int l = 0; l < g; ++l) {
    lin(layer_name("s32.gcn", l) + ".self", d, d);
    lin(layer_name("s32.gcn", l) + ".nbr", d, d, false);
  }
  mlp2("s32.node", (g + 1) * d, d, kAtomOneHotWidth);
  for (int l = 0; l <= g; ++l) {
    lin(layer_name("s32.att", l) + ".q", d, d, false);
    lin(layer_name("s32.att", l) + ".k", d, d, false);
  }
  mlp2("s32.edge", (g + 1) + kEdgeOneHotWidth + k, d, kEdgeOneHotWidth);

  mlp2("proj2d", d, d, d);
  mlp2("proj3d", d, d, d);
  return t;
}

NamedArrays init_params(const ModelConfig &cfg, uint64_t seed) {
  cfg.validate();
  NamedArrays out;
  for (const auto &[name, shape]: param_shapes(cfg)) {
    Array a(shape);
    Rng rng(derive_seed(seed, hash_name(name)));
    double std = 0.0;
    if (name.ends_with(".w")) {
      std = 1.0 / std::sqrt(static_cast<double>(shape[0]));
    } else if (name.find("atom_emb") != std::string::npos) {
      std = 1.0 / std::sqrt(static_cast<double>(kAtomColumnCount));
    } else if (name.find("bond_emb") != std::string::npos) {
      std = 1.0 / std::sqrt(static_cast<double>(kBondColumnCount));
    } else if (name.find("type_emb") != std::string::npos) {
      std = 1.0;
    }
    if (std > 0)
      for (auto &v: a.values())
        v = std * standard_normal(rng);
    out.emplace(name, std::move(a));
  }
  return out;
}

Var ParamBinder::operator()(const std::string &name) {
  auto it = bound_.find(name);
  if (it != bound_.end())
    return it->second;
  auto pit = params_.find(name);
  if (pit == params_.end())
    throw Error("missing parameter '" + name + "'");
  Var v = graph_.input(name, pit->second);
  bound_.emplace(name, v);
  return v;
}

Var encode_2d(ParamBinder &p, const ModelConfig &cfg,
              const MaskedTopology &mol) {
  DiffGraph &g = p.graph();
  const int64_t n = static_cast<int64_t>(mol.atoms.size());
  if (n < 1)
    throw Error("encode_2d: empty molecule");

  Var h;
  for (int c = 0; c < kAtomColumnCount; ++c) {
    std::vector<int64_t> idx(n);
    for (int64_t a = 0; a < n; ++a)
      idx[a] = mol.atoms[a][c];
    Var e = as_index_gather(p, "enc2d.atom_emb." + std::to_string(c),
                            std::move(idx));
    h = c == 0 ? e : h + e;
  }

  std::vector<int64_t> src, dst;
  std::array<std::vector<int64_t>, kBondColumnCount> bond_idx;
  for (const Bond &bd: mol.bonds) {
    for (auto [a, b]: { std::pair { bd.i, bd.j }, std::pair { bd.j, bd.i } }) {
      src.push_back(a);
      dst.push_back(b);
      bond_idx[kBondType].push_back(bd.type);
      bond_idx[kBondStereo].push_back(bd.stereo);
      bond_idx[kIsConjugated].push_back(bd.conjugated);
    }
  }
  const IndexList src_i = make_index(src), dst_i = make_index(dst);

  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string pre = layer_name("enc2d.layer", l);
    Var z = h;
    if (!src.empty()) {
      Var msg = g.gather_rows(h, src_i);
      for (int c = 0; c < kBondColumnCount; ++c)
        msg = msg
              + as_index_gather(p, pre + ".bond_emb." + std::to_string(c),
                                bond_idx[c]);
      z = h + g.scatter_add_rows(msg, dst_i, n);
    }
    h = mlp(p, pre + ".mlp", z);
    if (l + 1 < cfg.encoder_layers)
      h = act(h);
  }
  return h;
}

Var encode_3d(ParamBinder &p, const ModelConfig &cfg,
              const MaskedGeometry &mol) {
  DiffGraph &g = p.graph();
  const int64_t n = static_cast<int64_t>(mol.atom_types.size());
  if (n < 1)
    throw Error("encode_3d: empty molecule");

  std::vector<int64_t> types(mol.atom_types.begin(), mol.atom_types.end());
  Var h = as_index_gather(p, "enc3d.type_emb", std::move(types));

  std::vector<int64_t> src, dst;
  std::vector<double> rbf_rows, cut_rows;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      if (i == j)
        continue;
      const double d = (mol.coords.row(i) - mol.coords.row(j)).norm();
      if (d > cfg.encoder_cutoff)
        continue;
      src.push_back(j);
      dst.push_back(i);
      auto r = rbf_expand(d, cfg.rbf);
      rbf_rows.insert(rbf_rows.end(), r.begin(), r.end());
      cut_rows.push_back(
          0.5 * (std::cos(std::numbers::pi * d / cfg.encoder_cutoff) + 1.0));
    }
  }
  if (src.empty())
    return h;

  const int64_t e = static_cast<int64_t>(src.size());
  Var rbf = g.constant(Array({ e, cfg.rbf.centers }, std::move(rbf_rows)));
  Var cut = g.constant(Array({ e, 1 }, std::move(cut_rows)));
  const IndexList src_i = make_index(std::move(src));
  const IndexList dst_i = make_index(std::move(dst));

  for (int l = 0; l < cfg.encoder_layers; ++l) {
    const std::string pre = layer_name("enc3d.layer", l);
    Var filter = mlp(p, pre + ".filter", rbf) * cut;
    Var x = linear(p, pre + ".in", h, false);
    Var msg = g.gather_rows(x, src_i) * filter;
    Var agg = g.scatter_add_rows(msg, dst_i, n);
    h = h + mlp(p, pre + ".out", agg);
  }
  return h;
}

ConformerEdges build_conformer_edges(const Molecule2D &topo,
                                     const Coords &coords,
                                     const ModelConfig &cfg) {
  const int n = topo.num_atoms();
  if (coords.rows() != n)
    throw Error("conformer edges: coordinate rows do not match atom count");
  const auto hops = shortest_paths(topo);
  std::vector<std::vector<int>> bond_type(n, std::vector<int>(n, -1));
  for (const Bond &bd: topo.bonds)
    bond_type[bd.i][bd.j] = bond_type[bd.j][bd.i] = bd.type;

  ConformerEdges out;
  std::array<std::vector<double>, 3> axes;
  std::vector<double> feats, rbfs, topol;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j)
        continue;
      const Vec3 ri = coords.row(i).transpose();
      const Vec3 rj = coords.row(j).transpose();
      const double d = (ri - rj).norm();
      if (d > cfg.edge_cutoff && bond_type[i][j] < 0)
        continue;
      out.src.push_back(i);
      out.dst.push_back(j);

      std::array<double, kFrameFeatureWidth> f {};
      try {
        const LocalFrame fr = build_local_frame(ri, rj);
        for (int k = 0; k < 3; ++k)
          for (int c = 0; c < 3; ++c)
            axes[k].push_back(fr.axis(k)[c]);
        const Vec3 pd = project(ri - rj, fr), pi = project(ri, fr),
                   pj = project(rj, fr);
        for (int c = 0; c < 3; ++c) {
          f[c] = pd[c];
          f[3 + c] = pi[c];
          f[6 + c] = pj[c];
        }
      } catch (const DegenerateFrame &) {
        ++out.degenerate;
        for (int k = 0; k < 3; ++k)
          axes[k].insert(axes[k].end(), 3, 0.0);
        f[0] = d;
      }
      feats.insert(feats.end(), f.begin(), f.end());
      auto r = rbf_expand(d, cfg.rbf);
      rbfs.insert(rbfs.end(), r.begin(), r.end());

      std::array<double, kPairTopologyWidth> tp {};
      tp[bond_type[i][j] + 1] = 1.0;
      const int hop = hops[i][j];
      const int hop_slot = hop < 0 ? 5 : std::min(hop, 5) - 1;
      tp[kEdgeOneHotWidth + hop_slot] = 1.0;
      topol.insert(topol.end(), tp.begin(), tp.end());
    }
  }

  const int64_t e = out.size();
  if (e == 0)
    return out;
  for (int k = 0; k < 3; ++k)
    out.axes[k] = Array({ e, 3 }, std::move(axes[k]));
  out.frame_features = Array({ e, kFrameFeatureWidth }, std::move(feats));
  out.rbf = Array({ e, cfg.rbf.centers }, std::move(rbfs));
  out.topology = Array({ e, kPairTopologyWidth }, std::move(topol));
  return out;
}

Var score_2d_to_3d(ParamBinder &p, const ModelConfig &cfg,
                   const Molecule2D &topo, Var h2d, const Coords &coords,
                   double t, const PerturbKernel &kernel, FrameMode mode) {
  DiffGraph &g = p.graph();
  const int64_t n = topo.num_atoms();
  if (coords.rows() != n)
    throw Error("score_2d_to_3d: coordinate rows do not match atom count");
  const double off_center = centroid(coords).cwiseAbs().maxCoeff();
  if (off_center > 1e-6)
    throw Error("score_2d_to_3d: coordinates are not centered (centroid "
                + std::to_string(off_center) + ")");
  if (!(kernel.std > 0))
    throw Error("score_2d_to_3d: kernel std must be positive");

  const ConformerEdges edges = build_conformer_edges(topo, coords, cfg);
  const int64_t e = edges.size();
  if (e == 0)
    return g.constant(Array::matrix(n, 3));

  const IndexList src = make_index(edges.src), dst = make_index(edges.dst);
  const double c_in = input_scale(kernel, kCoordScale);

  std::vector<Var> parts { g.gather_rows(h2d, src), g.gather_rows(h2d, dst),
                           g.constant(edges.topology) };
  Var e2d = mlp(p, "s23.pair", g.concat_cols(parts));
  Var radial = linear(p, "s23.rbf", g.constant(edges.rbf), false);
  Var frame_in = g.scale(g.constant(edges.frame_features), c_in);
  Var e3d = linear(p, "s23.frame", frame_in);
  Var h = radial * e2d + e3d + time_embed(p, "s23.time", t, cfg.time_freqs);

  if (cfg.attention_layers > 0) {
    // Each directed edge (i, j) attends over the out-edges of i and j.
    std::vector<std::vector<int64_t>> out_edges(n);
    for (int64_t k = 0; k < e; ++k)
      out_edges[edges.src[k]].push_back(k);
    std::vector<int64_t> pe, pf;
    std::vector<double> inv_count(e);
    for (int64_t k = 0; k < e; ++k) {
      int64_t cnt = 0;
      for (int64_t node: { edges.src[k], edges.dst[k] }) {
        for (int64_t f: out_edges[node]) {
          pe.push_back(k);
          pf.push_back(f);
          ++cnt;
        }
      }
      inv_count[k] = 1.0 / static_cast<double>(cnt);
    }
    const IndexList pe_i = make_index(std::move(pe));
    const IndexList pf_i = make_index(std::move(pf));
    Var inv = g.constant(Array({ e, 1 }, std::move(inv_count)));
    const double qk_scale = 1.0 / std::sqrt(static_cast<double>(cfg.width));

    for (int a = 0; a < cfg.attention_layers; ++a) {
      const std::string pre = layer_name("s23.attn", a);
      Var q = linear(p, pre + ".q", h, false);
      Var k = linear(p, pre + ".k", h, false);
      Var v = linear(p, pre + ".v", h, false);
      Var logits =
          g.sum_cols(g.gather_rows(q, pe_i) * g.gather_rows(k, pf_i));
      Var w = g.tanh(g.scale(logits, qk_scale));
      Var msg = w * g.gather_rows(v, pf_i);
      Var agg = g.scatter_add_rows(msg, pe_i, e) * inv;
      h = h + act(linear(p, pre + ".out", agg));
    }
  }

  Var coef = mlp(p, "s23.head", h);
  Var vec;
  for (int k = 0; k < 3; ++k) {
    if (k == 1 && mode == FrameMode::kDropPseudoAxis)
      continue;
    Var term = g.slice_cols(coef, k, 1) * g.constant(edges.axes[k]);
    vec = vec.graph ? vec + term : term;
  }
  Var score = g.scatter_add_rows(vec, src, n);
  return g.scale(score, 1.0 / kernel.std);
}

TopologyScoreVars score_3d_to_2d(ParamBinder &p, const ModelConfig &cfg,
                                 Var h3d, const Coords &cond_coords,
                                 const Array &atoms_t, const Array &edges_t,
                                 double t, const PerturbKernel &kernel) {
  DiffGraph &g = p.graph();
  const int64_t n = atoms_t.rows();
  const int64_t w = kEdgeOneHotWidth;
  if (atoms_t.shape() != Shape { n, kAtomOneHotWidth })
    throw ShapeError("score_3d_to_2d: atom state has shape "
                     + shape_str(atoms_t.shape()));
  if (edges_t.shape() != Shape { n, n, w })
    throw ShapeError("score_3d_to_2d: edge state has shape "
                     + shape_str(edges_t.shape()));
  if (cond_coords.rows() != n || h3d.value().rows() != n)
    throw Error("score_3d_to_2d: conditioning size does not match atoms");
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j)
      for (int64_t c = 0; c < w; ++c)
        if (std::abs(edges_t[(i * n + j) * w + c]
                     - edges_t[(j * n + i) * w + c])
            > 1e-9)
          throw Error("score_3d_to_2d: edge state is not symmetric at ("
                      + std::to_string(i) + ", " + std::to_string(j) + ")");
  if (!(kernel.std > 0))
    throw Error("score_3d_to_2d: kernel std must be positive");

  const double c_in = input_scale(kernel, 1.0);
  const double qk_scale = 1.0 / std::sqrt(static_cast<double>(cfg.width));

  Var temb = time_embed(p, "s32.time", t, cfg.time_freqs);
  Var x_in = g.scale(g.constant(atoms_t), c_in);
  std::vector<Var> layers { mlp(p, "s32.xin", x_in) + h3d + temb };

  Array adj = Array::matrix(n, n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      if (i != j)
        for (int64_t c = 1; c < w; ++c)
          adj(i, j) += c_in * edges_t[(i * n + j) * w + c];
  Var adj_v = g.constant(std::move(adj));

  for (int l = 0; l < cfg.gcn_layers; ++l) {
    const std::string pre = layer_name("s32.gcn", l);
    Var hl = layers.back();
    Var nbr = g.matmul(adj_v, hl);
    layers.push_back(
        g.tanh(linear(p, pre + ".self", hl) + linear(p, pre + ".nbr", nbr,
                                                      false)));
  }

  Var node = mlp(p, "s32.node", g.concat_cols(layers));

  std::vector<Var> pair_parts;
  for (size_t l = 0; l < layers.size(); ++l) {
    const std::string pre = layer_name("s32.att", static_cast<int>(l));
    Var q = linear(p, pre + ".q", layers[l], false);
    Var k = linear(p, pre + ".k", layers[l], false);
    Var att = g.tanh(g.scale(g.matmul(q, g.transpose(k)), qk_scale));
    pair_parts.push_back(g.reshape(att, { n * n, 1 }));
  }
  Array e_flat = edges_t.reshaped({ n * n, w });
  for (auto &v: e_flat.values())
    v *= c_in;
  pair_parts.push_back(g.constant(std::move(e_flat)));
  {
    Array rbf({ n * n, cfg.rbf.centers });
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t j = 0; j < n; ++j) {
        const double d = (cond_coords.row(i) - cond_coords.row(j)).norm();
        auto r = rbf_expand(d, cfg.rbf);
        std::copy(r.begin(), r.end(),
                  rbf.data() + (i * n + j) * cfg.rbf.centers);
      }
    }
    pair_parts.push_back(g.constant(std::move(rbf)));
  }
  Var edge_raw = mlp(p, "s32.edge", g.concat_cols(pair_parts));
  std::vector<int64_t> swap(n * n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      swap[i * n + j] = j * n + i;
  Var edge =
      g.scale(edge_raw + g.gather_rows(edge_raw, make_index(std::move(swap))),
              0.5);

  const double out_scale = 1.0 / kernel.std;
  return { g.scale(node, out_scale), g.scale(edge, out_scale) };
}

Var project_2d(ParamBinder &p, Var h2d) {
  DiffGraph &g = p.graph();
  Var pooled = g.scale(g.sum_rows(h2d), 1.0 / h2d.value().rows());
  return mlp(p, "proj2d", pooled);
}

Var project_3d(ParamBinder &p, Var h3d) {
  DiffGraph &g = p.graph();
  Var pooled = g.scale(g.sum_rows(h3d), 1.0 / h3d.value().rows());
  return mlp(p, "proj3d", pooled);
}

Model make_model(const ModelConfig &cfg, const NoiseSchedule &sched,
                 uint64_t seed) {
  sched.validate();
  return { cfg, sched, init_params(cfg, seed) };
}

namespace {
  struct MetaField {
    const char *name;
    double (*get)(const Model &);
    void (*set)(Model &, double);
  };

  const MetaField kMeta[] = {
    { "meta.model.width", [](const Model &m) { return double(m.config.width); },
      [](Model &m, double v) { m.config.width = int(v); } },
    { "meta.model.encoder_layers",
      [](const Model &m) { return double(m.config.encoder_layers); },
      [](Model &m, double v) { m.config.encoder_layers = int(v); } },
    { "meta.model.attention_layers",
      [](const Model &m) { return double(m.config.attention_layers); },
      [](Model &m, double v) { m.config.attention_layers = int(v); } },
    { "meta.model.gcn_layers",
      [](const Model &m) { return double(m.config.gcn_layers); },
      [](Model &m, double v) { m.config.gcn_layers = int(v); } },
    { "meta.model.time_freqs",
      [](const Model &m) { return double(m.config.time_freqs); },
      [](Model &m, double v) { m.config.time_freqs = int(v); } },
    { "meta.model.rbf_centers",
      [](const Model &m) { return double(m.config.rbf.centers); },
      [](Model &m, double v) { m.config.rbf.centers = int(v); } },
    { "meta.model.rbf_cutoff",
      [](const Model &m) { return m.config.rbf.cutoff; },
      [](Model &m, double v) { m.config.rbf.cutoff = v; } },
    { "meta.model.rbf_gamma", [](const Model &m) { return m.config.rbf.gamma; },
      [](Model &m, double v) { m.config.rbf.gamma = v; } },
    { "meta.model.edge_cutoff",
      [](const Model &m) { return m.config.edge_cutoff; },
      [](Model &m, double v) { m.config.edge_cutoff = v; } },
    { "meta.model.encoder_cutoff",
      [](const Model &m) { return m.config.encoder_cutoff; },
      [](Model &m, double v) { m.config.encoder_cutoff = v; } },
    { "meta.sde.variant",
      [](const Model &m) {
        return m.sched.variant == SdeVariant::kVE ? 0.0 : 1.0;
      },
      [](Model &m, double v) {
        m.sched.variant = v == 0.0 ? SdeVariant::kVE : SdeVariant::kVP;
      } },
    { "meta.sde.sigma_min", [](const Model &m) { return m.sched.sigma_min; },
      [](Model &m, double v) { m.sched.sigma_min = v; } },
    { "meta.sde.sigma_max", [](const Model &m) { return m.sched.sigma_max; },
      [](Model &m, double v) { m.sched.sigma_max = v; } },
    { "meta.sde.beta_min", [](const Model &m) { return m.sched.beta_min; },
      [](Model &m, double v) { m.sched.beta_min = v; } },
    { "meta.sde.beta_max", [](const Model &m) { return m.sched.beta_max; },
      [](Model &m, double v) { m.sched.beta_max = v; } },
    { "meta.sde.steps",
      [](const Model &m) { return double(m.sched.steps); },
      [](Model &m, double v) { m.sched.steps = int(v); } },
  };
} // namespace

NamedArrays model_to_arrays(const Model &model) {
  NamedArrays out = model.params;
  for (const MetaField &f: kMeta)
    out[f.name] = Array({ 1 }, { f.get(model) });
  return out;
}

Model model_from_arrays(const NamedArrays &arrays) {
  Model m;
  for (const MetaField &f: kMeta) {
    auto it = arrays.find(f.name);
    if (it == arrays.end())
      throw Error(std::string("checkpoint lacks ") + f.name);
    f.set(m, it->second.item());
  }
  m.config.validate();
  m.sched.validate();

  const ShapeTable shapes = param_shapes(m.config);
  for (const auto &[name, shape]: shapes) {
    auto it = arrays.find(name);
    if (it == arrays.end())
      throw Error("checkpoint lacks parameter '" + name + "'");
    if (it->second.shape() != shape)
      throw ShapeError("checkpoint parameter '" + name + "' has shape "
                       + shape_str(it->second.shape()) + ", expected "
                       + shape_str(shape));
    m.params.emplace(name, it->second);
  }
  return m;
}

Array conformer_score(const Model &model, const Molecule2D &topo,
                      const Coords &coords, double t, FrameMode mode) {
  return ConformerScorer(model, topo, mode)(coords, t);
}

ConformerScorer::ConformerScorer(const Model &model, const Molecule2D &topo,
                                 FrameMode mode)
    : model_(model), topo_(topo), mode_(mode) {
  DiffGraph g;
  ParamBinder p(g, model.params);
  h2d_ = encode_2d(p, model.config, apply_mask(topo, MaskSpec {})).value();
}

Array ConformerScorer::operator()(const Coords &coords, double t) const {
  DiffGraph g;
  ParamBinder p(g, model_.params);
  Var h = g.constant(h2d_);
  return score_2d_to_3d(p, model_.config, topo_, h, coords, t,
                        kernel_at(model_.sched, t), mode_)
      .value();
}

TopologyScorer::TopologyScorer(const Model &model, const Molecule3D &geom)
    : model_(model), coords_(geom.coords) {
  DiffGraph g;
  ParamBinder p(g, model.params);
  h3d_ = encode_3d(p, model.config, apply_mask(geom, MaskSpec {})).value();
}

TopologyScore TopologyScorer::operator()(const Array &atoms_t,
                                         const Array &edges_t,
                                         double t) const {
  DiffGraph g;
  ParamBinder p(g, model_.params);
  Var h = g.constant(h3d_);
  auto s = score_3d_to_2d(p, model_.config, h, coords_, atoms_t, edges_t, t,
                          kernel_at(model_.sched, t));
  const int64_t n = atoms_t.rows();
  return { s.node.value(), s.edge.value().reshaped({ n, n, kEdgeOneHotWidth }) };
}

const char *to_string(SymmetryKind k) {
  switch (k) {
  case SymmetryKind::kRotation:
    return "rotation";
  case SymmetryKind::kReflection:
    return "reflection";
  case SymmetryKind::kPermutation:
    return "permutation";
  case SymmetryKind::kTranslation:
    return "translation";
  }
  return "?";
}

const char *to_string(ScoreNet n) {
  return n == ScoreNet::kConformation ? "conformation" : "topology";
}

namespace {
  Coords apply_linear(const Coords &x, const Mat3 &m) {
    return x * m.transpose();
  }

  Coords array_to_coords(const Array &a) {
    Coords c(a.rows(), 3);
    for (int64_t r = 0; r < a.rows(); ++r)
      for (int k = 0; k < 3; ++k)
        c(r, k) = a(r, k);
    return c;
  }

  double max_abs_diff(const Array &a, const Array &b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.size(); ++i)
      m = std::max(m, std::abs(a[i] - b[i]));
    return m;
  }

  double max_abs_diff(const TopologyScore &a, const TopologyScore &b) {
    return std::max(max_abs_diff(a.node, b.node), max_abs_diff(a.edge, b.edge));
  }

  std::vector<int> random_permutation(int n, Rng &rng) {
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i)
      perm[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
    return perm;
  }

  // Generic (noisy, symmetric) diffused topology state.
  std::pair<Array, Array> noisy_topology_state(const Molecule2D &topo,
                                               Rng &rng) {
    const int64_t n = topo.num_atoms();
    Array atoms = Array::matrix(n, kAtomOneHotWidth);
    for (int64_t i = 0; i < n; ++i) {
      for (int64_t c = 0; c < kAtomOneHotWidth; ++c)
        atoms(i, c) = 0.3 * standard_normal(rng);
      atoms(i, encode_atom(topo.atoms[i])[kAtomType]) += 1.0;
    }
    Array edges = to_dense_edge_tensor(topo);
    const int64_t w = kEdgeOneHotWidth;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = i; j < n; ++j)
        for (int64_t c = 0; c < w; ++c) {
          const double z = 0.3 * standard_normal(rng);
          edges[(i * n + j) * w + c] += z;
          if (j != i)
            edges[(j * n + i) * w + c] += z;
        }
    return { std::move(atoms), std::move(edges) };
  }

  Coords noisy_coords(const Coords &c, Rng &rng) {
    Coords out = c;
    for (int64_t i = 0; i < out.rows(); ++i)
      for (int k = 0; k < 3; ++k)
        out(i, k) += 0.3 * standard_normal(rng);
    return center_coordinates(out);
  }

  double conformation_trial(SymmetryKind kind, const Model &model,
                            const MoleculePair &mol, FrameMode mode,
                            Rng &rng) {
    const Coords x = noisy_coords(mol.geom.coords, rng);
    const double t = uniform_real(rng, 0.05, 1.0);
    const ConformerScorer score(model, mol.topo, mode);
    const Array base = score(x, t);

    switch (kind) {
    case SymmetryKind::kRotation: {
      const Mat3 q = random_rotation(rng);
      const Array rotated = score(apply_linear(x, q), t);
      const Coords expect = apply_linear(array_to_coords(base), q);
      double m = 0.0;
      for (int64_t i = 0; i < expect.rows(); ++i)
        for (int k = 0; k < 3; ++k)
          m = std::max(m, std::abs(rotated(i, k) - expect(i, k)));
      return m;
    }
    case SymmetryKind::kReflection: {
      Mat3 rho = random_rotation(rng);
      rho.col(0) *= -1.0;
      const Array mirrored = score(apply_linear(x, rho), t);
      const Coords expect = apply_linear(array_to_coords(base), rho);
      double num = 0.0, den = 0.0;
      for (int64_t i = 0; i < expect.rows(); ++i)
        for (int k = 0; k < 3; ++k) {
          num += std::pow(mirrored(i, k) - expect(i, k), 2);
          den += base(i, k) * base(i, k);
        }
      return den > 0 ? std::sqrt(num / den) : 0.0;
    }
    case SymmetryKind::kPermutation: {
      const auto perm = random_permutation(mol.num_atoms(), rng);
      const Molecule2D ptopo = permute_atoms(mol.topo, perm);
      Molecule3D g { mol.geom.atom_types, x };
      const Coords px = permute_atoms(g, perm).coords;
      const Array permuted = ConformerScorer(model, ptopo, mode)(px, t);
      double m = 0.0;
      for (int64_t k = 0; k < permuted.rows(); ++k)
        for (int c = 0; c < 3; ++c)
          m = std::max(m, std::abs(permuted(k, c) - base(perm[k], c)));
      return m;
    }
    case SymmetryKind::kTranslation: {
      Coords shifted = x;
      const Vec3 v(uniform_real(rng, -5, 5), uniform_real(rng, -5, 5),
                   uniform_real(rng, -5, 5));
      shifted.rowwise() += v.transpose();
      return max_abs_diff(score(center_coordinates(shifted), t), base);
    }
    }
    return 0.0;
  }

  double topology_trial(SymmetryKind kind, const Model &model,
                        const MoleculePair &mol, Rng &rng) {
    const Molecule3D geom { mol.geom.atom_types,
                            noisy_coords(mol.geom.coords, rng) };
    auto [atoms, edges] = noisy_topology_state(mol.topo, rng);
    const double t = uniform_real(rng, 0.05, 1.0);
    const TopologyScore base = TopologyScorer(model, geom)(atoms, edges, t);

    switch (kind) {
    case SymmetryKind::kRotation:
    case SymmetryKind::kTranslation: {
      Molecule3D moved = geom;
      if (kind == SymmetryKind::kRotation)
        moved.coords = apply_linear(moved.coords, random_rotation(rng));
      const Vec3 v(uniform_real(rng, -5, 5), uniform_real(rng, -5, 5),
                   uniform_real(rng, -5, 5));
      moved.coords.rowwise() += v.transpose();
      return max_abs_diff(TopologyScorer(model, moved)(atoms, edges, t), base);
    }
    case SymmetryKind::kPermutation: {
      const int64_t n = mol.num_atoms();
      const int64_t w = kEdgeOneHotWidth;
      const auto perm = random_permutation(static_cast<int>(n), rng);
      Array patoms = atoms, pedges = edges;
      for (int64_t k = 0; k < n; ++k) {
        for (int64_t c = 0; c < kAtomOneHotWidth; ++c)
          patoms(k, c) = atoms(perm[k], c);
        for (int64_t l = 0; l < n; ++l)
          for (int64_t c = 0; c < w; ++c)
            pedges[(k * n + l) * w + c] =
                edges[(perm[k] * n + perm[l]) * w + c];
      }
      const TopologyScore ps =
          TopologyScorer(model, permute_atoms(geom, perm))(patoms, pedges, t);
      double m = 0.0;
      for (int64_t k = 0; k < n; ++k) {
        for (int64_t c = 0; c < kAtomOneHotWidth; ++c)
          m = std::max(m, std::abs(ps.node(k, c) - base.node(perm[k], c)));
        for (int64_t l = 0; l < n; ++l)
          for (int64_t c = 0; c < w; ++c)
            m = std::max(m, std::abs(ps.edge[(k * n + l) * w + c]
                                     - base.edge[(perm[k] * n + perm[l]) * w
                                                 + c]));
      }
      return m;
    }
    case SymmetryKind::kReflection:
      break;
    }
    return 0.0;
  }
} // namespace

SymmetryReport check_symmetry(SymmetryKind kind, ScoreNet net,
                              const Model &model,
                              std::span<const MoleculePair> molecules,
                              int trials, double tol, uint64_t seed,
                              FrameMode mode) {
  if (molecules.empty())
    throw Error("check_symmetry: no molecules");
  if (trials < 1)
    throw Error("check_symmetry: trials must be positive");

  SymmetryReport rep { .kind = kind, .net = net, .trials = trials };
  // The topology score is invariant under every rigid motion, mirror
  // images included, so there is no reflection sensitivity to test.
  if (net == ScoreNet::kTopology && kind == SymmetryKind::kReflection) {
    rep.applicable = false;
    rep.trials = 0;
    rep.passed = true;
    return rep;
  }

  Rng rng(seed);
  int ok = 0;
  rep.min_deviation = std::numeric_limits<double>::infinity();
  for (int k = 0; k < trials; ++k) {
    const MoleculePair &mol = molecules[k % molecules.size()];
    const double dev = net == ScoreNet::kConformation
                           ? conformation_trial(kind, model, mol, mode, rng)
                           : topology_trial(kind, model, mol, rng);
    rep.max_deviation = std::max(rep.max_deviation, dev);
    rep.min_deviation = std::min(rep.min_deviation, dev);
    const bool trial_ok =
        kind == SymmetryKind::kReflection ? dev > tol : dev < tol;
    ok += trial_ok ? 1 : 0;
  }
  rep.pass_fraction = static_cast<double>(ok) / trials;
  rep.passed = kind == SymmetryKind::kReflection ? rep.pass_fraction >= 0.95
                                                 : ok == trials;
  return rep;
}

} // namespace msde
