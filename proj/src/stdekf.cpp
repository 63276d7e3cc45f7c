#include "objslam/stdekf.hpp"

#include "objslam/errors.hpp"

namespace objslam::stdekf {

namespace {

GroupState aligned(const GroupState& lin, const GroupState& est) {
  if (lin.feature_ids == est.feature_ids) return lin;
  return lin.select(est.feature_ids);
}

}  // namespace

PropagationJacobians propagation_jacobians(const GroupState& lin, const Odometry& u,
                                           const GroupState* lin_next) {
  const TangentLayout L{lin.num_features()};
  const auto n = static_cast<Eigen::Index>(L.dim());
  const Mat3& R = lin.robot_rot;
  const Vec3 step = lin_next ? Vec3(lin_next->robot_pos - lin.robot_pos) : Vec3(R * u.pos);

  PropagationJacobians jac;
  jac.F = MatX::Identity(n, n);
  jac.F.block<3, 3>(L.robot_pos(), L.robot_rot()) = -skew(step);
  jac.G = MatX::Zero(n, 6);
  jac.G.block<3, 3>(L.robot_rot(), 0) = R;
  jac.G.block<3, 3>(L.robot_pos(), 3) = R;
  return jac;
}

FilterState propagate(const FilterState& state, const Odometry& u, const GroupState& lin,
                      const GroupState* lin_next) {
  const GroupState at = aligned(lin, state.mean);
  PropagationJacobians jac;
  if (lin_next) {
    const GroupState next = aligned(*lin_next, state.mean);
    jac = propagation_jacobians(at, u, &next);
  } else {
    jac = propagation_jacobians(at, u);
  }
  FilterState out;
  out.mean = propagate_mean(state.mean, u);
  out.cov = jac.F * state.cov * jac.F.transpose() + jac.G * u.noise_cov * jac.G.transpose();
  out.cov = symmetrized(out.cov);
  return out;
}

MatX observation_jacobian(const GroupState& lin, std::size_t feature_index) {
  const TangentLayout L{lin.num_features()};
  const Mat3 Rt = lin.robot_rot.transpose();
  MatX H = MatX::Zero(6, static_cast<Eigen::Index>(L.dim()));
  H.block<3, 3>(0, L.robot_rot()) = -Rt;
  H.block<3, 3>(0, L.feature_rot(feature_index)) = Rt;
  H.block<3, 3>(3, L.robot_rot()) = Rt * skew(lin.feature_pos[feature_index] - lin.robot_pos);
  H.block<3, 3>(3, L.robot_pos()) = -Rt;
  H.block<3, 3>(3, L.feature_pos(feature_index)) = Rt;
  return H;
}

Innovation innovation(const FilterState& state, const PoseObservation& z, const GroupState& lin) {
  const auto j = state.mean.index_of(z.feature_id);
  if (!j) throw MissingFeature("no feature '" + z.feature_id + "' in state");
  Innovation inn;
  inn.feature_index = *j;
  inn.y = observation_residual(state.mean, *j, z);
  inn.H = observation_jacobian(aligned(lin, state.mean), *j);
  inn.S = inn.H * state.cov * inn.H.transpose() + z.noise_cov;
  inn.S = 0.5 * (inn.S + inn.S.transpose());
  return inn;
}

GroupState retract(const GroupState& x, const VecX& delta) {
  const TangentLayout L{x.num_features()};
  if (static_cast<std::size_t>(delta.size()) != L.dim()) {
    throw DimensionMismatch("correction has wrong dimension");
  }
  GroupState out = x;
  out.robot_rot = so3_exp(delta.segment<3>(L.robot_rot())) * x.robot_rot;
  out.robot_pos += delta.segment<3>(L.robot_pos());
  for (std::size_t j = 0; j < L.num_features; ++j) {
    out.feature_rots[j] = so3_exp(delta.segment<3>(L.feature_rot(j))) * x.feature_rots[j];
    out.feature_pos[j] += delta.segment<3>(L.feature_pos(j));
  }
  return out;
}

FilterState apply_innovation(const FilterState& state, const Innovation& inn,
                             const UpdateOptions& opts) {
  FilterState out;
  out.cov = state.cov;
  const VecX delta = kalman_correct(out.cov, inn, opts);
  out.mean = retract(state.mean, delta);
  return out;
}

FilterState update(const FilterState& state, const PoseObservation& z, const GroupState& lin,
                   const UpdateOptions& opts) {
  return apply_innovation(state, innovation(state, z, lin), opts);
}

AugmentationJacobians augmentation_jacobians(const GroupState& lin, const PoseObservation& z) {
  const TangentLayout L{lin.num_features()};
  AugmentationJacobians jac;
  jac.state = MatX::Zero(6, static_cast<Eigen::Index>(L.dim()));
  jac.state.block<3, 3>(0, L.robot_rot()) = Mat3::Identity();
  jac.state.block<3, 3>(3, L.robot_rot()) = -skew(lin.robot_rot * z.pos);
  jac.state.block<3, 3>(3, L.robot_pos()) = Mat3::Identity();
  jac.noise = Mat6::Zero();
  jac.noise.block<3, 3>(0, 0) = -lin.robot_rot;
  jac.noise.block<3, 3>(3, 3) = -lin.robot_rot;
  return jac;
}

FilterState initialize_feature(const FilterState& state, const PoseObservation& z,
                               const GroupState* lin) {
  if (state.mean.index_of(z.feature_id)) {
    throw DuplicateFeature("feature '" + z.feature_id + "' already initialized");
  }
  const auto jac = augmentation_jacobians(lin ? *lin : state.mean, z);
  const MatX AP = jac.state * state.cov;
  const Mat6 D = AP * jac.state.transpose() + jac.noise * z.noise_cov * jac.noise.transpose();
  FilterState out;
  out.mean = augment_mean(state.mean, z);
  out.cov = symmetrized(augment_covariance(state.cov, state.mean.num_features(), AP, D));
  return out;
}

}  // namespace objslam::stdekf
