//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/metrics.h"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

#include "msde/geom3d.h"

namespace msde {

CovMatReport cov_mat(const std::vector<Molecule3D> &references,
                     const std::vector<Molecule3D> &generated, double delta) {
  if (generated.empty())
    throw Error("cov_mat: generated set is empty");
  if (references.empty())
    throw Error("cov_mat: reference set is empty");
  if (!(delta > 0))
    throw Error("cov_mat: delta must be positive");
  const int n = references.front().num_atoms();
  for (const auto *set: { &references, &generated })
    for (const Molecule3D &m: *set)
      if (m.num_atoms() != n || m.atom_types != references.front().atom_types)
        throw Error("cov_mat: conformers differ in atom count or order");

  CovMatReport rep;
  rep.delta = delta;
  int covered = 0;
  double total = 0.0;
  for (const Molecule3D &r: references) {
    double best = std::numeric_limits<double>::infinity();
    for (const Molecule3D &g: generated)
      best = std::min(best, kabsch_rmsd(g.coords, r.coords).rmsd);
    rep.min_rmsd.push_back(best);
    covered += best <= delta ? 1 : 0;
    total += best;
  }
  const double m = static_cast<double>(references.size());
  rep.coverage = covered / m;
  rep.matching = total / m;
  return rep;
}

Aggregate parse_aggregate(const std::string &s) {
  if (s == "mean")
    return Aggregate::kMean;
  if (s == "median")
    return Aggregate::kMedian;
  throw Error("unknown aggregate '" + s + "' (expected mean or median)");
}

namespace {
  double aggregate(std::vector<double> v, Aggregate how) {
    if (how == Aggregate::kMean)
      return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    std::sort(v.begin(), v.end());
    const size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  }
} // namespace

CovMatSummary cov_mat_by_id(const std::vector<MoleculePair> &references,
                            const std::vector<MoleculePair> &generated,
                            double delta, Aggregate how) {
  std::map<std::string, std::vector<Molecule3D>> refs, gens;
  std::vector<std::string> order;
  for (const MoleculePair &m: references) {
    if (!refs.contains(m.id))
      order.push_back(m.id);
    refs[m.id].push_back(m.geom);
  }
  for (const MoleculePair &m: generated)
    gens[m.id].push_back(m.geom);
  if (order.empty())
    throw Error("cov_mat: reference corpus is empty");

  CovMatSummary out;
  out.aggregate = how;
  std::vector<double> cov, mat;
  for (const std::string &id: order) {
    auto it = gens.find(id);
    if (it == gens.end())
      throw Error("cov_mat: no generated conformers for molecule '" + id
                  + "'");
    CovMatReport r = cov_mat(refs[id], it->second, delta);
    cov.push_back(r.coverage);
    mat.push_back(r.matching);
    out.groups.push_back({ id, std::move(r) });
  }
  out.coverage = aggregate(cov, how);
  out.matching = aggregate(mat, how);
  return out;
}

double roc_auc(const std::vector<double> &scores,
               const std::vector<int> &labels) {
  if (scores.size() != labels.size())
    throw Error("roc_auc: score and label counts differ");
  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), size_t { 0 });
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Sum of positive ranks with ties sharing their average rank.
  double rank_sum = 0.0;
  int64_t pos = 0;
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]])
      ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (size_t k = i; k < j; ++k)
      if (labels[idx[k]]) {
        rank_sum += avg;
        ++pos;
      }
    i = j;
  }
  const int64_t neg = static_cast<int64_t>(scores.size()) - pos;
  if (pos == 0 || neg == 0)
    throw Error("roc_auc: need both positive and negative labels");
  return (rank_sum - 0.5 * pos * (pos + 1.0)) / (static_cast<double>(pos) * neg);
}

} // namespace msde
