//
// SPDX-License-Identifier: Apache-2.0
//

#ifndef MSDE_GEOM3D_H_
#define MSDE_GEOM3D_H_

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "msde/array.h"
#include "msde/moldata.h"
#include "msde/random.h"

namespace msde {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class DegenerateFrame: public Error {
public:
  using Error::Error;
};

constexpr double kFrameEpsilon = 1e-10;

/// Orthonormal frame attached to an ordered atom pair. e1 and e3 transform
/// as vectors under improper rotations; e2 is built from a cross product of
/// positions and picks up the determinant sign, which is what makes frame
/// projections chirality-aware.
struct LocalFrame {
  Vec3 e1;
  Vec3 e2;
  Vec3 e3;

  const Vec3 &axis(int k) const { return k == 0 ? e1 : (k == 1 ? e2 : e3); }
};

struct RbfSpec {
  int centers = 16;
  double cutoff = 5.0;
  double gamma = 10.0;

  void validate() const;
  bool operator==(const RbfSpec &) const = default;
};

Coords center_coordinates(const Coords &coords);
Vec3 centroid(const Coords &coords);

/// Frame for the ordered pair (r_i, r_j) of centered positions:
/// e1 = (r_i - r_j)/|r_i - r_j|, e2 = (r_i x r_j)/|r_i x r_j|, e3 = e1 x e2.
/// Throws DegenerateFrame when either norm is below kFrameEpsilon.
LocalFrame build_local_frame(const Vec3 &ri, const Vec3 &rj);

Vec3 project(const Vec3 &v, const LocalFrame &f);
Vec3 tensorize(const Vec3 &s, const LocalFrame &f);

std::vector<double> rbf_expand(double d, const RbfSpec &spec);

struct KabschResult {
  Mat3 rotation;  // proper rotation applied to centered P to best match Q
  double rmsd;
};

KabschResult kabsch_rmsd(const Coords &p, const Coords &q);

Mat3 random_rotation(Rng &rng);

} // namespace msde

#endif // MSDE_GEOM3D_H_
