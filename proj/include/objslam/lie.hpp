#pragma once

// Rotation-group primitives and the product group holding a robot pose plus
// K object poses. The group law is
//
//   (Rr1, Rf1, pr1, pf1) + (Rr2, Rf2, pr2, pf2)
//     = (Rr1 Rr2, Rf1 Rf2, Rr1 pr2 + pr1, Rr1 pf2 + pf1)
//
// i.e. the robot rotation and every position form SE_{K+1}(3) while each
// object rotation lives in its own SO(3) factor.

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace objslam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rot3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

using FeatureId = std::string;

/// Below this angle the closed forms switch to Taylor expansions.
inline constexpr double kSmallAngle = 1e-4;

Mat3 skew(const Vec3& v);

Rot3 so3_exp(const Vec3& phi);

/// Principal logarithm, |result| <= pi. Throws InvalidRotation when the input
/// is not orthonormal to 1e-9. At angle pi the axis sign makes the
/// largest-magnitude component positive.
Vec3 so3_log(const Rot3& R);

/// J_l(phi) = sum_k skew(phi)^k / (k+1)!
Mat3 left_jacobian(const Vec3& phi);
Mat3 left_jacobian_inverse(const Vec3& phi);

bool is_rotation(const Mat3& R, double tol = 1e-9);

/// Nearest rotation in the Frobenius sense (polar projection).
Rot3 project_to_rotation(const Mat3& M);

/// Unit quaternion (w, x, y, z) <-> rotation matrix.
Eigen::Vector4d rotation_to_quaternion(const Rot3& R);
Rot3 quaternion_to_rotation(const Eigen::Vector4d& wxyz);

/// Element of the product group: robot pose plus K object poses.
struct GroupState {
  Rot3 robot_rot = Rot3::Identity();
  Vec3 robot_pos = Vec3::Zero();
  std::vector<Rot3> feature_rots;
  std::vector<Vec3> feature_pos;
  std::vector<FeatureId> feature_ids;

  std::size_t num_features() const { return feature_ids.size(); }
  /// Error-state dimension 6 + 6K.
  std::size_t dim() const { return 6 + 6 * num_features(); }
  std::optional<std::size_t> index_of(const FeatureId& id) const;

  /// Throws DimensionMismatch if the per-feature arrays disagree in length.
  void validate() const;

  static GroupState identity(std::vector<FeatureId> ids = {});

  /// Copy holding only the listed features, in the listed order.
  GroupState select(const std::vector<FeatureId>& ids) const;
};

/// Offsets into the (6+6K) error vector: all rotations first (robot, then
/// features in state order), then all positions in the same order.
struct TangentLayout {
  std::size_t num_features = 0;

  std::size_t dim() const { return 6 + 6 * num_features; }
  std::size_t robot_rot() const { return 0; }
  std::size_t feature_rot(std::size_t j) const { return 3 + 3 * j; }
  std::size_t robot_pos() const { return 3 + 3 * num_features; }
  std::size_t feature_pos(std::size_t j) const { return 6 + 3 * num_features + 3 * j; }
};

GroupState group_compose(const GroupState& a, const GroupState& b);
GroupState group_inverse(const GroupState& a);
/// a + b^{-1}
GroupState group_between(const GroupState& a, const GroupState& b);

/// Every position uses the left Jacobian of the robot rotation part.
GroupState group_exp(const VecX& xi, const std::vector<FeatureId>& ids);

/// Exact inverse of group_exp. Throws LogDomainError if any rotation angle
/// is within 1e-6 of pi.
VecX group_log(const GroupState& a);

}  // namespace objslam
