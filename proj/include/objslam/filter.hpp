#pragma once

// Value types shared by the invariant and the standard filters.

#include <cstddef>
#include <utility>

#include "objslam/lie.hpp"

namespace objslam {

/// Mean on the group plus covariance of the (6+6K) error vector.
struct FilterState {
  GroupState mean;
  MatX cov;

  std::size_t dim() const { return mean.dim(); }
  /// Throws DimensionMismatch / SingularCovariance on broken invariants.
  void validate(double sym_tol = 1e-10, double eig_tol = 1e-10) const;

  static FilterState anchored(GroupState mean);  // zero covariance
};

/// Relative robot motion U = (R^u, p^u) with 6x6 noise [rotation; position].
struct Odometry {
  Rot3 rot = Rot3::Identity();
  Vec3 pos = Vec3::Zero();
  Mat6 noise_cov = Mat6::Zero();
};

/// Relative pose of an object in the robot frame, Z = (R^z, p^z).
struct PoseObservation {
  FeatureId feature_id;
  Rot3 rot = Rot3::Identity();
  Vec3 pos = Vec3::Zero();
  Mat6 noise_cov = Mat6::Identity();
};

struct Innovation {
  Vec6 y;   // [y^R; y^p]
  MatX H;   // 6 x (6+6K)
  Mat6 S;   // H P H^T + Omega
  std::size_t feature_index = 0;
};

struct UpdateOptions {
  bool joseph = false;
  double max_condition = 1e12;
};

/// New-feature error as a linear function of the prior error and the
/// observation noise: e_new = state * e + noise * v.
struct AugmentationJacobians {
  MatX state;  // 6 x (6+6K), rows [rotation; position]
  Mat6 noise;
};

/// Noise-free propagation X (+) (R^u, I, p^u, 0). Same for every filter.
GroupState propagate_mean(const GroupState& x, const Odometry& u);

/// Predicted relative pose of feature j seen from the robot.
std::pair<Rot3, Vec3> predict_observation(const GroupState& x, std::size_t j);

/// [log(R^z Rf^T Rr); p^z - Rr^T (pf - pr)] against the estimate x.
Vec6 observation_residual(const GroupState& x, std::size_t j, const PoseObservation& z);

/// New-feature mean (Rr R^z, pr + Rr p^z) appended to the end of the state.
GroupState augment_mean(const GroupState& x, const PoseObservation& z);

/// Grows P by one feature: new rows are A P, new diagonal block D. The new
/// rotation block goes to the end of the rotation section and the new
/// position block to the end of the position section.
MatX augment_covariance(const MatX& P, std::size_t num_features, const MatX& AP, const Mat6& D);

/// Gain, covariance correction and symmetrization shared by both filters.
/// Returns the correction K y.
VecX kalman_correct(MatX& P, const Innovation& inn, const UpdateOptions& opts);

inline MatX symmetrized(const MatX& P) { return 0.5 * (P + P.transpose()); }

}  // namespace objslam
