#pragma once

// Standard (SO(3)-) EKF baseline with per-block errors
//   R = exp(eta^R) R_hat,  p = p_hat + eta^p,
// laid out exactly like the invariant error. The ideal-EKF is this filter
// with every Jacobian evaluated at the ground truth.

#include <functional>

#include "objslam/filter.hpp"

namespace objslam::stdekf {

/// Ground-truth provider for the ideal variant, indexed by time step.
using GroundTruthHook = std::function<const GroupState&(std::size_t step)>;

struct PropagationJacobians {
  MatX F;
  MatX G;  // (6+6K) x 6
};

/// F couples robot position to robot rotation through -(R p^u)^. When
/// `lin_next` is given (ideal mode) the displacement is taken from the two
/// linearization states instead, -(p_next - p_lin)^.
PropagationJacobians propagation_jacobians(const GroupState& lin, const Odometry& u,
                                           const GroupState* lin_next = nullptr);

FilterState propagate(const FilterState& state, const Odometry& u, const GroupState& lin,
                      const GroupState* lin_next = nullptr);

/// Like the invariant H plus the block Rr^T (pf - pr)^ coupling position
/// residual to robot rotation.
MatX observation_jacobian(const GroupState& lin, std::size_t feature_index);

Innovation innovation(const FilterState& state, const PoseObservation& z, const GroupState& lin);

/// Additive position correction, left-multiplicative exp(delta) rotation correction.
FilterState apply_innovation(const FilterState& state, const Innovation& inn,
                             const UpdateOptions& opts = {});

FilterState update(const FilterState& state, const PoseObservation& z, const GroupState& lin,
                   const UpdateOptions& opts = {});

AugmentationJacobians augmentation_jacobians(const GroupState& lin, const PoseObservation& z);

/// Mean as in the invariant filter; covariance from first-order Jacobians
/// of the eta-error of the new feature. `lin` defaults to the estimate.
FilterState initialize_feature(const FilterState& state, const PoseObservation& z,
                               const GroupState* lin = nullptr);

/// Apply a correction vector in the eta convention.
GroupState retract(const GroupState& x, const VecX& delta);

}  // namespace objslam::stdekf
