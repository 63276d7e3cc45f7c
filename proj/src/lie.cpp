#include "objslam/lie.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "objslam/errors.hpp"

namespace objslam {

namespace {

Vec3 vee(const Mat3& S) { return Vec3(S(2, 1), S(0, 2), S(1, 0)); }

double rotation_angle(const Rot3& R) {
  const double s = 0.5 * vee(R - R.transpose()).norm();
  const double c = 0.5 * (R.trace() - 1.0);
  return std::atan2(s, c);
}

void check_rotation(const Mat3& R) {
  if (!R.allFinite() || !is_rotation(R)) {
    throw InvalidRotation("matrix is not a rotation (orthonormality or det check failed)");
  }
}

void check_same_shape(const GroupState& a, const GroupState& b) {
  if (a.num_features() != b.num_features() || a.feature_ids != b.feature_ids) {
    throw DimensionMismatch("group states hold different feature sets");
  }
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 m;
  // clang-format off
  m <<    0.0, -v.z(),  v.y(),
        v.z(),    0.0, -v.x(),
       -v.y(),  v.x(),    0.0;
  // clang-format on
  return m;
}

Rot3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  const double t2 = theta * theta;
  const Mat3 K = skew(phi);
  double a;  // sin(t)/t
  double b;  // (1-cos(t))/t^2
  if (theta < kSmallAngle) {
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  } else {
    const double half = std::sin(0.5 * theta);
    a = std::sin(theta) / theta;
    b = 2.0 * half * half / t2;
  }
  return Mat3::Identity() + a * K + b * K * K;
}

Vec3 so3_log(const Rot3& R) {
  check_rotation(R);
  const Vec3 w = 0.5 * vee(R - R.transpose());  // sin(t) * axis
  const double s = w.norm();
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);

  if (theta < kSmallAngle) {
    return (1.0 + theta * theta / 6.0) * w;
  }
  if (std::numbers::pi - theta > 1e-6) {
    return (theta / s) * w;
  }

  // Near pi: the axis comes from the symmetric part, aa^T = (sym(R) - cI)/(1-c).
  const Mat3 A = (0.5 * (R + R.transpose()) - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index k = 0;
  A.diagonal().maxCoeff(&k);
  Vec3 axis = A.col(k) / std::sqrt(std::max(A(k, k), 0.0));
  axis.normalize();
  const double along = w.dot(axis);
  if (std::abs(along) > 1e-12) {
    if (along < 0.0) axis = -axis;
  } else {
    Eigen::Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis(big) < 0.0) axis = -axis;
  }
  return theta * axis;
}

Mat3 left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const double t2 = theta * theta;
  const Mat3 K = skew(phi);
  double b;  // (1-cos(t))/t^2
  double c;  // (t-sin(t))/t^3
  if (theta < kSmallAngle) {
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  } else {
    const double half = std::sin(0.5 * theta);
    b = 2.0 * half * half / t2;
    c = (theta - std::sin(theta)) / (t2 * theta);
  }
  return Mat3::Identity() + b * K + c * K * K;
}

Mat3 left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const double t2 = theta * theta;
  const Mat3 K = skew(phi);
  double e;
  if (theta < kSmallAngle) {
    e = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    const double half = 0.5 * theta;
    e = (1.0 - half * std::cos(half) / std::sin(half)) / t2;
  }
  return Mat3::Identity() - 0.5 * K + e * K * K;
}

bool is_rotation(const Mat3& R, double tol) {
  return (R * R.transpose() - Mat3::Identity()).norm() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

Rot3 project_to_rotation(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * D * svd.matrixV().transpose();
}

Eigen::Vector4d rotation_to_quaternion(const Rot3& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  return {q.w(), q.x(), q.y(), q.z()};
}

Rot3 quaternion_to_rotation(const Eigen::Vector4d& wxyz) {
  Eigen::Quaterniond q(wxyz(0), wxyz(1), wxyz(2), wxyz(3));
  q.normalize();
  return q.toRotationMatrix();
}

std::optional<std::size_t> GroupState::index_of(const FeatureId& id) const {
  const auto it = std::find(feature_ids.begin(), feature_ids.end(), id);
  if (it == feature_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - feature_ids.begin());
}

void GroupState::validate() const {
  if (feature_rots.size() != feature_ids.size() || feature_pos.size() != feature_ids.size()) {
    throw DimensionMismatch("feature rotation/position/id arrays differ in length");
  }
}

GroupState GroupState::identity(std::vector<FeatureId> ids) {
  GroupState s;
  s.feature_rots.assign(ids.size(), Rot3::Identity());
  s.feature_pos.assign(ids.size(), Vec3::Zero());
  s.feature_ids = std::move(ids);
  return s;
}

GroupState GroupState::select(const std::vector<FeatureId>& ids) const {
  GroupState out;
  out.robot_rot = robot_rot;
  out.robot_pos = robot_pos;
  for (const auto& id : ids) {
    const auto j = index_of(id);
    if (!j) throw MissingFeature("feature '" + id + "' not in state");
    out.feature_rots.push_back(feature_rots[*j]);
    out.feature_pos.push_back(feature_pos[*j]);
    out.feature_ids.push_back(id);
  }
  return out;
}

GroupState group_compose(const GroupState& a, const GroupState& b) {
  check_same_shape(a, b);
  GroupState out;
  out.feature_ids = a.feature_ids;
  out.robot_rot = a.robot_rot * b.robot_rot;
  out.robot_pos = a.robot_rot * b.robot_pos + a.robot_pos;
  if (!is_rotation(out.robot_rot)) out.robot_rot = project_to_rotation(out.robot_rot);
  const std::size_t K = a.num_features();
  out.feature_rots.resize(K);
  out.feature_pos.resize(K);
  for (std::size_t j = 0; j < K; ++j) {
    out.feature_rots[j] = a.feature_rots[j] * b.feature_rots[j];
    if (!is_rotation(out.feature_rots[j])) {
      out.feature_rots[j] = project_to_rotation(out.feature_rots[j]);
    }
    out.feature_pos[j] = a.robot_rot * b.feature_pos[j] + a.feature_pos[j];
  }
  return out;
}

GroupState group_inverse(const GroupState& a) {
  GroupState out;
  out.feature_ids = a.feature_ids;
  out.robot_rot = a.robot_rot.transpose();
  out.robot_pos = -out.robot_rot * a.robot_pos;
  for (std::size_t j = 0; j < a.num_features(); ++j) {
    out.feature_rots.push_back(a.feature_rots[j].transpose());
    out.feature_pos.push_back(-out.robot_rot * a.feature_pos[j]);
  }
  return out;
}

GroupState group_between(const GroupState& a, const GroupState& b) {
  return group_compose(a, group_inverse(b));
}

GroupState group_exp(const VecX& xi, const std::vector<FeatureId>& ids) {
  const TangentLayout L{ids.size()};
  if (static_cast<std::size_t>(xi.size()) != L.dim()) {
    throw DimensionMismatch("tangent vector has dimension " + std::to_string(xi.size()) +
                            ", expected " + std::to_string(L.dim()));
  }
  GroupState out;
  out.feature_ids = ids;
  const Vec3 phi = xi.segment<3>(L.robot_rot());
  const Mat3 J = left_jacobian(phi);
  out.robot_rot = so3_exp(phi);
  out.robot_pos = J * xi.segment<3>(L.robot_pos());
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out.feature_rots.push_back(so3_exp(xi.segment<3>(L.feature_rot(j))));
    out.feature_pos.push_back(J * xi.segment<3>(L.feature_pos(j)));
  }
  return out;
}

VecX group_log(const GroupState& a) {
  a.validate();
  const auto guard = [](const Rot3& R) {
    if (std::numbers::pi - rotation_angle(R) < 1e-6) {
      throw LogDomainError("rotation angle at the pi boundary of the group logarithm");
    }
  };
  guard(a.robot_rot);
  for (const auto& R : a.feature_rots) guard(R);

  const TangentLayout L{a.num_features()};
  VecX xi(L.dim());
  const Vec3 phi = so3_log(a.robot_rot);
  const Mat3 Jinv = left_jacobian_inverse(phi);
  xi.segment<3>(L.robot_rot()) = phi;
  xi.segment<3>(L.robot_pos()) = Jinv * a.robot_pos;
  for (std::size_t j = 0; j < a.num_features(); ++j) {
    xi.segment<3>(L.feature_rot(j)) = so3_log(a.feature_rots[j]);
    xi.segment<3>(L.feature_pos(j)) = Jinv * a.feature_pos[j];
  }
  return xi;
}

}  // namespace objslam
