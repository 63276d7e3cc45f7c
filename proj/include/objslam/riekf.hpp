#pragma once

// Right-invariant EKF on the robot + object-pose group.
//
// The error is xi with X = exp(xi) (+) X_hat. Under this error the
// propagation Jacobian is the identity whatever the state, and the
// observation Jacobian depends only on the robot rotation.

#include "objslam/filter.hpp"

namespace objslam::riekf {

struct PropagationJacobians {
  MatX F;  // (6+6K) square, always identity
  MatX G;  // (6+6K) x 6, noise columns [w^R, w^p]
};

/// Jacobians of the error propagation evaluated at `lin` (normally the
/// current estimate X_{n|n}).
PropagationJacobians propagation_jacobians(const GroupState& lin, const Odometry& u);

/// P_{n+1|n} = F P F^T + G Sigma G^T. `lin` overrides the linearization
/// point (ground truth for the ideal-Jacobian variant).
FilterState propagate(const FilterState& state, const Odometry& u,
                      const GroupState* lin = nullptr);

/// 6 x (6+6K). Blocks -Rr^T on the robot, +Rr^T on feature j, rotation and
/// position rows alike.
MatX observation_jacobian(const GroupState& lin, std::size_t feature_index);

/// Throws MissingFeature when z refers to an unknown feature.
Innovation innovation(const FilterState& state, const PoseObservation& z,
                      const GroupState* lin = nullptr);

/// Applies a precomputed innovation: X <- exp(K y) (+) X, P <- (I - K H) P.
FilterState apply_innovation(const FilterState& state, const Innovation& inn,
                             const UpdateOptions& opts = {});

FilterState update(const FilterState& state, const PoseObservation& z,
                   const UpdateOptions& opts = {});

AugmentationJacobians augmentation_jacobians(const GroupState& est, const PoseObservation& z);

/// Adds a feature from its first observation (K -> K+1). Throws
/// DuplicateFeature when the id is already in the state.
FilterState initialize_feature(const FilterState& state, const PoseObservation& z);

}  // namespace objslam::riekf
