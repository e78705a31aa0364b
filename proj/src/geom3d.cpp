//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/geom3d.h"

#include <cmath>

namespace msde {

void RbfSpec::validate() const {
  if (centers < 2)
    throw Error("rbf: need at least 2 centers");
  if (!(cutoff > 0))
    throw Error("rbf: cutoff must be positive");
  if (!(gamma > 0))
    throw Error("rbf: gamma must be positive");
}

Vec3 centroid(const Coords &coords) {
  return coords.colwise().mean().transpose();
}

Coords center_coordinates(const Coords &coords) {
  if (coords.rows() < 1)
    throw Error("center_coordinates: empty point cloud");
  const Eigen::RowVector3d c = coords.colwise().mean();
  return coords.rowwise() - c;
}

LocalFrame build_local_frame(const Vec3 &ri, const Vec3 &rj) {
  const Vec3 diff = ri - rj;
  const Vec3 cross = ri.cross(rj);
  const double dn = diff.norm(), cn = cross.norm();
  if (dn < kFrameEpsilon || cn < kFrameEpsilon)
    throw DegenerateFrame("degenerate local frame: |ri - rj| = "
                          + std::to_string(dn) + ", |ri x rj| = "
                          + std::to_string(cn));
  LocalFrame f;
  f.e1 = diff / dn;
  f.e2 = cross / cn;
  f.e3 = f.e1.cross(f.e2);
  return f;
}

Vec3 project(const Vec3 &v, const LocalFrame &f) {
  return { v.dot(f.e1), v.dot(f.e2), v.dot(f.e3) };
}

Vec3 tensorize(const Vec3 &s, const LocalFrame &f) {
  return s[0] * f.e1 + s[1] * f.e2 + s[2] * f.e3;
}

std::vector<double> rbf_expand(double d, const RbfSpec &spec) {
  if (d < 0)
    throw Error("rbf_expand: negative distance");
  std::vector<double> out(spec.centers);
  const double step = spec.cutoff / (spec.centers - 1);
  for (int k = 0; k < spec.centers; ++k) {
    const double diff = d - k * step;
    out[k] = std::exp(-spec.gamma * diff * diff);
  }
  return out;
}

KabschResult kabsch_rmsd(const Coords &p, const Coords &q) {
  if (p.rows() != q.rows() || p.rows() < 1)
    throw Error("kabsch_rmsd: point clouds must have equal, nonzero size");
  const Coords pc = center_coordinates(p);
  const Coords qc = center_coordinates(q);
  // The SVD path leaves roundoff for identical clouds.
  if (pc == qc)
    return { Mat3::Identity(), 0.0 };

  const Mat3 h = pc.transpose() * qc;
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU(), v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Mat3 rot = v * d * u.transpose();

  const Coords aligned = pc * rot.transpose();
  const double msd = (aligned - qc).rowwise().squaredNorm().mean();
  return { rot, std::sqrt(std::max(msd, 0.0)) };
}

Mat3 random_rotation(Rng &rng) {
  Eigen::Vector4d qv;
  for (int k = 0; k < 4; ++k)
    qv[k] = standard_normal(rng);
  qv.normalize();
  return Eigen::Quaterniond(qv[0], qv[1], qv[2], qv[3]).toRotationMatrix();
}

} // namespace msde
