#pragma once

#include <Eigen/Dense>

namespace subriem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A point of the cotangent bundle in chart coordinates: base point q and covector components lam.
struct PhasePoint {
  Vec q;
  Vec lam;
};

}  // namespace subriem
