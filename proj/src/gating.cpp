#include "objslam/gating.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>

namespace objslam {

GateDecision gate(const Innovation& inn, double bound) {
  GateDecision d;
  if (!inn.S.allFinite() || !inn.y.allFinite() || inn.S.llt().info() != Eigen::Success) {
    d.accepted = false;
    d.margins.fill(std::numeric_limits<double>::infinity());
    d.diagnostic = "innovation covariance is not positive definite";
    return d;
  }
  d.accepted = true;
  for (int k = 0; k < 6; ++k) {
    d.margins[k] = std::abs(inn.y(k)) / std::sqrt(inn.S(k, k));
    if (!(d.margins[k] < bound)) d.accepted = false;
  }
  return d;
}

}  // namespace objslam
