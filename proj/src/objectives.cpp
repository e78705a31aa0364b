//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/objectives.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "msde/geom3d.h"
#include "msde/sde.h"

namespace msde {

void LossWeights::validate() const {
  for (double w: { contrastive, conf, topo })
    if (!(w >= 0) || !std::isfinite(w))
      throw Error("loss weights must be finite and nonnegative");
  if (contrastive == 0 && conf == 0 && topo == 0)
    throw Error("at least one loss weight must be positive");
}

Rng item_rng(uint64_t batch_seed, uint64_t item, LossStream stream) {
  return Rng(derive_seed(derive_seed(batch_seed, item), stream));
}

void Batch::validate() const {
  if (items.empty())
    throw Error("batch is empty");
  if (!(mask_ratio >= 0 && mask_ratio < 1))
    throw Error("mask ratio must be in [0, 1)");
}

Var weighted_sq_error(Var score, const Array &target, double lambda,
                      double norm) {
  DiffGraph &g = *score.graph;
  if (score.value().size() != target.size())
    throw ShapeError("weighted_sq_error: score " + shape_str(score.shape())
                     + " vs target " + shape_str(target.shape()));
  Var tgt = g.constant(target.reshaped(score.shape()));
  return g.scale(g.sum(g.square(score - tgt)), lambda / norm);
}

namespace {
  Array coords_to_array(const Coords &c) {
    Array a = Array::matrix(c.rows(), 3);
    for (int64_t i = 0; i < c.rows(); ++i)
      for (int k = 0; k < 3; ++k)
        a(i, k) = c(i, k);
    return a;
  }

  Coords normal_coords(int64_t n, Rng &rng) {
    Coords z(n, 3);
    for (int64_t i = 0; i < n; ++i)
      for (int k = 0; k < 3; ++k)
        z(i, k) = standard_normal(rng);
    return z;
  }

  MaskSpec item_mask(const Batch &batch, size_t b, LossStream stream) {
    Rng rng = item_rng(batch.seed, b, stream);
    return { batch.mask_ratio, rng() };
  }

  std::vector<Var> encode_items_2d(ParamBinder &p, const Model &model,
                                   const Batch &batch) {
    std::vector<Var> out;
    for (size_t b = 0; b < batch.items.size(); ++b)
      out.push_back(encode_2d(p, model.config,
                              apply_mask(batch.items[b].topo,
                                         item_mask(batch, b, kStreamMask2d))));
    return out;
  }

  std::vector<Var> encode_items_3d(ParamBinder &p, const Model &model,
                                   const Batch &batch) {
    std::vector<Var> out;
    for (size_t b = 0; b < batch.items.size(); ++b)
      out.push_back(encode_3d(p, model.config,
                              apply_mask(batch.items[b].geom,
                                         item_mask(batch, b, kStreamMask3d))));
    return out;
  }

  Var batch_mean(std::vector<Var> terms) {
    Var s = terms[0];
    for (size_t i = 1; i < terms.size(); ++i)
      s = s + terms[i];
    return s.graph->scale(s, 1.0 / static_cast<double>(terms.size()));
  }

  Var conf_from(ParamBinder &p, const Model &model, const Batch &batch,
                const std::vector<Var> &h2d, double t_eps) {
    std::vector<Var> terms;
    for (size_t b = 0; b < batch.items.size(); ++b) {
      const MoleculePair &m = batch.items[b];
      Rng rng = item_rng(batch.seed, b, kStreamConf);
      const double t = uniform_real(rng, t_eps, 1.0);
      const Coords z = normal_coords(m.num_atoms(), rng);
      terms.push_back(conformer_dsm_loss(p, model, m.topo, h2d[b],
                                         center_coordinates(m.geom.coords), z,
                                         t));
    }
    return batch_mean(std::move(terms));
  }

  Var topo_from(ParamBinder &p, const Model &model, const Batch &batch,
                const std::vector<Var> &h3d, double t_eps) {
    std::vector<Var> terms;
    for (size_t b = 0; b < batch.items.size(); ++b) {
      const MoleculePair &m = batch.items[b];
      const int64_t n = m.num_atoms();
      Rng rng = item_rng(batch.seed, b, kStreamTopo);
      const double t = uniform_real(rng, t_eps, 1.0);
      Array zx = sample_normal({ n, kAtomOneHotWidth }, 1.0, rng);
      Array ze = sample_normal({ n, n, kEdgeOneHotWidth }, 1.0, rng);
      terms.push_back(
          topology_dsm_loss(p, model, h3d[b], m.geom.coords, m.topo, zx, ze, t));
    }
    return batch_mean(std::move(terms));
  }

  Var contrastive_from(ParamBinder &p, const Batch &batch,
                       const std::vector<Var> &h2d,
                       const std::vector<Var> &h3d) {
    DiffGraph &g = p.graph();
    std::vector<Var> z2, z3;
    for (size_t b = 0; b < batch.items.size(); ++b) {
      z2.push_back(project_2d(p, h2d[b]));
      z3.push_back(project_3d(p, h3d[b]));
    }
    Rng rng = item_rng(batch.seed, 0, kStreamContrastive);
    return ebm_nce_loss(g.concat_rows(z2), g.concat_rows(z3), rng);
  }
} // namespace

Var conformer_dsm_loss(ParamBinder &p, const Model &model,
                       const Molecule2D &topo, Var h2d, const Coords &x0,
                       const Coords &noise, double t) {
  const PerturbKernel k = kernel_at(model.sched, t);
  const Coords z = center_coordinates(noise);
  const Coords x_t = k.mean_coef * x0 + k.std * z;
  const Array target =
      dsm_target(coords_to_array(x_t), coords_to_array(x0), k);
  Var score = score_2d_to_3d(p, model.config, topo, h2d, x_t, t, k);
  return weighted_sq_error(score, target, k.std * k.std,
                           static_cast<double>(x0.rows()));
}

Var topology_dsm_loss(ParamBinder &p, const Model &model, Var h3d,
                      const Coords &cond_coords, const Molecule2D &topo,
                      const Array &atom_noise, const Array &edge_noise,
                      double t) {
  const int64_t n = topo.num_atoms();
  const int64_t w = kEdgeOneHotWidth;
  if (atom_noise.shape() != Shape { n, kAtomOneHotWidth }
      || edge_noise.shape() != Shape { n, n, w })
    throw ShapeError("topology_dsm_loss: noise shapes do not match molecule");
  const PerturbKernel k = kernel_at(model.sched, t);

  Array x0 = Array::matrix(n, kAtomOneHotWidth);
  for (int64_t i = 0; i < n; ++i)
    x0(i, encode_atom(topo.atoms[i])[kAtomType]) = 1.0;
  Array x_t = x0;
  for (int64_t i = 0; i < x_t.size(); ++i)
    x_t[i] = k.mean_coef * x0[i] + k.std * atom_noise[i];

  const Array e0 = to_dense_edge_tensor(topo);
  Array e_t({ n, n, w });
  std::vector<int64_t> upper;
  Array e_target = Array::matrix(n * (n - 1) / 2, w);
  int64_t row = 0;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j, ++row) {
      upper.push_back(i * n + j);
      for (int64_t c = 0; c < w; ++c) {
        const int64_t ij = (i * n + j) * w + c;
        const double v = k.mean_coef * e0[ij] + k.std * edge_noise[ij];
        e_t[ij] = v;
        e_t[(j * n + i) * w + c] = v;
        e_target(row, c) = (k.mean_coef * e0[ij] - v) / (k.std * k.std);
      }
    }
  }

  const TopologyScoreVars s =
      score_3d_to_2d(p, model.config, h3d, cond_coords, x_t, e_t, t, k);
  const double lambda = k.std * k.std;
  const double norm = static_cast<double>(n);
  Var loss = weighted_sq_error(s.node, dsm_target(x_t, x0, k), lambda, norm);
  if (!upper.empty()) {
    Var e_upper = p.graph().gather_rows(s.edge, make_index(std::move(upper)));
    loss = loss + weighted_sq_error(e_upper, e_target, lambda, norm);
  }
  return loss;
}

Var loss_2d_to_3d(ParamBinder &p, const Model &model, const Batch &batch,
                  double t_eps) {
  batch.validate();
  return conf_from(p, model, batch, encode_items_2d(p, model, batch), t_eps);
}

Var loss_3d_to_2d(ParamBinder &p, const Model &model, const Batch &batch,
                  double t_eps) {
  batch.validate();
  return topo_from(p, model, batch, encode_items_3d(p, model, batch), t_eps);
}

Var ebm_nce_from_logits(Var pos, Var neg) {
  DiffGraph &g = *pos.graph;
  return g.mean(g.softplus(g.neg(pos))) + g.mean(g.softplus(neg));
}

Var ebm_nce_loss(Var z2d, Var z3d, Rng &rng) {
  DiffGraph &g = *z2d.graph;
  const int64_t b = z2d.value().rows();
  if (z3d.shape() != z2d.shape())
    throw ShapeError("ebm_nce_loss: representation shapes differ");
  if (b < 2)
    throw Error("ebm_nce_loss: batch of " + std::to_string(b)
                + " has no negatives; need at least 2");
  const int64_t shift = 1 + static_cast<int64_t>(uniform_index(rng, b - 1));
  std::vector<int64_t> idx(b);
  for (int64_t i = 0; i < b; ++i)
    idx[i] = (i + shift) % b;
  Var pos = g.sum_cols(z2d * z3d);
  Var neg = g.sum_cols(z2d * g.gather_rows(z3d, make_index(std::move(idx))));
  return ebm_nce_from_logits(pos, neg);
}

Var contrastive_loss(ParamBinder &p, const Model &model, const Batch &batch) {
  batch.validate();
  return contrastive_from(p, batch, encode_items_2d(p, model, batch),
                          encode_items_3d(p, model, batch));
}

LossVars total_loss(ParamBinder &p, const Model &model, const Batch &batch,
                    const LossWeights &weights, double t_eps) {
  weights.validate();
  batch.validate();
  DiffGraph &g = p.graph();
  LossVars out;
  std::vector<Var> h2d, h3d;
  if (weights.contrastive > 0 || weights.conf > 0)
    h2d = encode_items_2d(p, model, batch);
  if (weights.contrastive > 0 || weights.topo > 0)
    h3d = encode_items_3d(p, model, batch);

  auto accumulate = [&](Var term, double w) {
    Var scaled = g.scale(term, w);
    out.total = out.total.graph ? out.total + scaled : scaled;
  };
  if (weights.contrastive > 0) {
    out.contrastive = contrastive_from(p, batch, h2d, h3d);
    accumulate(out.contrastive, weights.contrastive);
  }
  if (weights.conf > 0) {
    out.conf = conf_from(p, model, batch, h2d, t_eps);
    accumulate(out.conf, weights.conf);
  }
  if (weights.topo > 0) {
    out.topo = topo_from(p, model, batch, h3d, t_eps);
    accumulate(out.topo, weights.topo);
  }
  return out;
}

namespace {
  double value_or_zero(Var v) { return v.graph ? v.value().item() : 0.0; }
} // namespace

LossEvaluation evaluate_loss(const Model &model, const Batch &batch,
                             const LossWeights &weights, double t_eps) {
  DiffGraph g;
  ParamBinder p(g, model.params);
  const LossVars v = total_loss(p, model, batch, weights, t_eps);
  LossEvaluation out;
  out.values = { v.total.value().item(), value_or_zero(v.contrastive),
                 value_or_zero(v.conf), value_or_zero(v.topo) };
  if (std::isfinite(out.values.total))
    out.grads = g.input_gradients(v.total);
  return out;
}

GradientCheckReport gradient_check(const Model &model, const Batch &batch,
                                   const LossWeights &weights,
                                   double fraction, uint64_t seed,
                                   double step) {
  if (!(fraction > 0 && fraction <= 1))
    throw Error("gradient_check: fraction must be in (0, 1]");
  DiffGraph g;
  ParamBinder p(g, model.params);
  const Var total = total_loss(p, model, batch, weights).total;
  const NamedArrays analytic = g.input_gradients(total);
  const Var outputs[] = { total };

  GradientCheckReport rep;
  for (const auto &[name, grad]: analytic) {
    const Array &base = model.params.at(name);
    const int64_t m = base.size();
    const int64_t count = std::max<int64_t>(
        1, static_cast<int64_t>(std::llround(fraction * m)));
    std::vector<int64_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, hash_name(name)));
    for (int64_t k = 0; k < count; ++k)
      std::swap(idx[k], idx[k + uniform_index(rng, m - k)]);

    for (int64_t k = 0; k < count; ++k) {
      const int64_t i = idx[k];
      Array probe = base;
      probe[i] = base[i] + step;
      const double up = g.evaluate({ { name, probe } }, outputs)[0].item();
      probe[i] = base[i] - step;
      const double down = g.evaluate({ { name, probe } }, outputs)[0].item();
      const double numeric = (up - down) / (2 * step);
      const double a = grad[i];
      const double rel = std::abs(a - numeric)
                         / std::max({ std::abs(a), std::abs(numeric), 1e-3 });
      ++rep.checked;
      if (rel >= rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst = name + "[" + std::to_string(i) + "]";
      }
    }
    g.evaluate({ { name, base } }, {});
  }
  return rep;
}

void TrainConfig::validate() const {
  if (epochs < 0)
    throw Error("train.epochs must be nonnegative");
  if (batch_size < 1)
    throw Error("train.batch_size must be positive");
  if (max_steps < 0)
    throw Error("train.max_steps must be nonnegative");
  if (!(t_eps > 0 && t_eps < 1))
    throw Error("train.t_eps must be in (0, 1)");
  if (!(mask_ratio >= 0 && mask_ratio < 1))
    throw Error("mask.ratio must be in [0, 1)");
  if (!(adam.lr > 0))
    throw Error("train.lr must be positive");
  weights.validate();
}

std::vector<EpochRecord> train(Model &model,
                               const std::vector<MoleculePair> &corpus,
                               const TrainConfig &config,
                               const EpochCallback &on_epoch) {
  config.validate();
  if (corpus.empty())
    throw Error("train: corpus is empty");
  const bool contrastive = config.weights.contrastive > 0;
  if (contrastive && corpus.size() < 2)
    throw Error("train: the contrastive term needs at least 2 molecules");
  if (contrastive && config.batch_size < 2)
    throw Error("train: the contrastive term needs batch_size >= 2");

  OptimState state = make_optim_state(model.params, config.adam);
  Rng shuffle_rng(derive_seed(config.seed, 0x5348));
  std::vector<EpochRecord> curve;
  int64_t step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.max_steps > 0 && step >= config.max_steps)
      break;
    std::vector<size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), size_t { 0 });
    for (size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[uniform_index(shuffle_rng, i + 1)]);

    LossValues sum;
    int batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      if (config.max_steps > 0 && step >= config.max_steps)
        break;
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      if (contrastive && end - start < 2)
        continue;
      Batch batch;
      batch.seed = derive_seed(config.seed, 0x4241, step);
      batch.mask_ratio = config.mask_ratio;
      for (size_t k = start; k < end; ++k)
        batch.items.push_back(corpus[order[k]]);

      LossEvaluation ev =
          evaluate_loss(model, batch, config.weights, config.t_eps);
      if (!std::isfinite(ev.values.total))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch)
                    + ", step " + std::to_string(step) + " (contrastive "
                    + std::to_string(ev.values.contrastive) + ", 2d3d "
                    + std::to_string(ev.values.conf) + ", 3d2d "
                    + std::to_string(ev.values.topo) + ")");
      adam_step(model.params, ev.grads, state);
      ++step;
      ++batches;
      sum.total += ev.values.total;
      sum.contrastive += ev.values.contrastive;
      sum.conf += ev.values.conf;
      sum.topo += ev.values.topo;
    }
    if (batches == 0)
      break;
    const double inv = 1.0 / batches;
    EpochRecord rec { epoch,
                      { sum.total * inv, sum.contrastive * inv,
                        sum.conf * inv, sum.topo * inv } };
    curve.push_back(rec);
    if (on_epoch)
      on_epoch(rec);
  }
  return curve;
}

namespace {
  std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  }
} // namespace

void write_loss_csv(const std::filesystem::path &path,
                    const std::vector<EpochRecord> &curve) {
  std::ofstream out(path);
  if (!out)
    throw Error("cannot write loss curve to " + path.string());
  out << "epoch,loss_total,loss_contrastive,loss_2d3d,loss_3d2d\n";
  for (const EpochRecord &r: curve)
    out << r.epoch << ',' << fmt(r.mean.total) << ','
        << fmt(r.mean.contrastive) << ',' << fmt(r.mean.conf) << ','
        << fmt(r.mean.topo) << '\n';
  if (!out)
    throw Error("failed writing loss curve to " + path.string());
}

} // namespace msde
