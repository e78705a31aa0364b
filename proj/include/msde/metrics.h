//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_METRICS_H_
#define MSDE_METRICS_H_

#include <string>
#include <vector>

#include "msde/moldata.h"

namespace msde {

struct CovMatReport {
  double coverage = 0.0;
  double matching = 0.0;
  double delta = 0.0;
  // Per reference: minimum Kabsch RMSD over the generated set.
  std::vector<double> min_rmsd;
};

/// Coverage = fraction of references whose best match is within `delta`;
/// matching = mean best-match RMSD.
CovMatReport cov_mat(const std::vector<Molecule3D> &references,
                     const std::vector<Molecule3D> &generated, double delta);

enum class Aggregate { kMean, kMedian };

Aggregate parse_aggregate(const std::string &s);

struct CovMatGroup {
  std::string id;
  CovMatReport report;
};

struct CovMatSummary {
  Aggregate aggregate = Aggregate::kMean;
  double coverage = 0.0;
  double matching = 0.0;
  std::vector<CovMatGroup> groups;
};

/// Groups both corpora by molecule id, runs cov_mat per id and aggregates
/// COV and MAT across molecules. Every reference id needs generated
/// conformers.
CovMatSummary cov_mat_by_id(const std::vector<MoleculePair> &references,
                            const std::vector<MoleculePair> &generated,
                            double delta, Aggregate aggregate);

/// Area under the ROC curve via the Mann-Whitney statistic; ties count one
/// half. Needs at least one positive and one negative.
double roc_auc(const std::vector<double> &scores,
               const std::vector<int> &labels);

} // namespace msde

#endif // MSDE_METRICS_H_
