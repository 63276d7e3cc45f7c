#include "objslam/riekf.hpp"

#include "objslam/errors.hpp"

namespace objslam::riekf {

PropagationJacobians propagation_jacobians(const GroupState& lin, const Odometry& u) {
  const TangentLayout L{lin.num_features()};
  const auto n = static_cast<Eigen::Index>(L.dim());
  const Mat3& R = lin.robot_rot;

  PropagationJacobians jac;
  jac.F = MatX::Identity(n, n);
  jac.G = MatX::Zero(n, 6);
  jac.G.block<3, 3>(L.robot_rot(), 0) = R;
  jac.G.block<3, 3>(L.robot_pos(), 0) = skew(lin.robot_pos + R * u.pos) * R;
  jac.G.block<3, 3>(L.robot_pos(), 3) = R;
  for (std::size_t j = 0; j < L.num_features; ++j) {
    jac.G.block<3, 3>(L.feature_pos(j), 0) = skew(lin.feature_pos[j]) * R;
  }
  return jac;
}

FilterState propagate(const FilterState& state, const Odometry& u, const GroupState* lin) {
  const auto jac = propagation_jacobians(lin ? *lin : state.mean, u);
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
  H.block<3, 3>(3, L.robot_pos()) = -Rt;
  H.block<3, 3>(3, L.feature_pos(feature_index)) = Rt;
  return H;
}

Innovation innovation(const FilterState& state, const PoseObservation& z, const GroupState* lin) {
  const auto j = state.mean.index_of(z.feature_id);
  if (!j) throw MissingFeature("no feature '" + z.feature_id + "' in state");
  Innovation inn;
  inn.feature_index = *j;
  inn.y = observation_residual(state.mean, *j, z);
  inn.H = observation_jacobian(lin ? lin->select(state.mean.feature_ids) : state.mean, *j);
  inn.S = inn.H * state.cov * inn.H.transpose() + z.noise_cov;
  inn.S = 0.5 * (inn.S + inn.S.transpose());
  return inn;
}

FilterState apply_innovation(const FilterState& state, const Innovation& inn,
                             const UpdateOptions& opts) {
  FilterState out;
  out.cov = state.cov;
  const VecX xi = kalman_correct(out.cov, inn, opts);
  out.mean = group_compose(group_exp(xi, state.mean.feature_ids), state.mean);
  return out;
}

FilterState update(const FilterState& state, const PoseObservation& z, const UpdateOptions& opts) {
  return apply_innovation(state, innovation(state, z), opts);
}

AugmentationJacobians augmentation_jacobians(const GroupState& est, const PoseObservation&) {
  const TangentLayout L{est.num_features()};
  AugmentationJacobians jac;
  jac.state = MatX::Zero(6, static_cast<Eigen::Index>(L.dim()));
  jac.state.block<3, 3>(0, L.robot_rot()) = Mat3::Identity();
  jac.state.block<3, 3>(3, L.robot_pos()) = Mat3::Identity();
  jac.noise = Mat6::Zero();
  jac.noise.block<3, 3>(0, 0) = -est.robot_rot;
  jac.noise.block<3, 3>(3, 3) = -est.robot_rot;
  return jac;
}

FilterState initialize_feature(const FilterState& state, const PoseObservation& z) {
  if (state.mean.index_of(z.feature_id)) {
    throw DuplicateFeature("feature '" + z.feature_id + "' already initialized");
  }
  const std::size_t K = state.mean.num_features();
  const auto nr = static_cast<Eigen::Index>(3 + 3 * K);
  const MatX& P = state.cov;
  const MatX PRR = P.topLeftCorner(nr, nr);
  const MatX PRp = P.topRightCorner(nr, nr);
  const MatX PpR = P.bottomLeftCorner(nr, nr);
  const MatX Ppp = P.bottomRightCorner(nr, nr);

  // M1 = M2 = [I_3 0_{3,3K}] pick the robot block of each section.
  MatX M = MatX::Zero(3, nr);
  M.leftCols<3>().setIdentity();

  const Mat3& R = state.mean.robot_rot;
  const Mat6& W = z.noise_cov;
  const Mat3 PfRR = M * PRR * M.transpose() + R * W.block<3, 3>(0, 0) * R.transpose();
  const Mat3 PfRp = M * PRp * M.transpose() + R * W.block<3, 3>(0, 3) * R.transpose();
  const Mat3 Pfpp = M * Ppp * M.transpose() + R * W.block<3, 3>(3, 3) * R.transpose();

  const Eigen::Index m = nr + 3;
  MatX Paug(2 * m, 2 * m);
  Paug.block(0, 0, nr, nr) = PRR;
  Paug.block(0, nr, nr, 3) = PRR * M.transpose();
  Paug.block(0, m, nr, nr) = PRp;
  Paug.block(0, m + nr, nr, 3) = PRp * M.transpose();

  Paug.block(nr, 0, 3, nr) = M * PRR;
  Paug.block(nr, nr, 3, 3) = PfRR;
  Paug.block(nr, m, 3, nr) = M * PRp;
  Paug.block(nr, m + nr, 3, 3) = PfRp;

  Paug.block(m, 0, nr, nr) = PpR;
  Paug.block(m, nr, nr, 3) = PpR * M.transpose();
  Paug.block(m, m, nr, nr) = Ppp;
  Paug.block(m, m + nr, nr, 3) = Ppp * M.transpose();

  Paug.block(m + nr, 0, 3, nr) = M * PpR;
  Paug.block(m + nr, nr, 3, 3) = PfRp.transpose();
  Paug.block(m + nr, m, 3, nr) = M * Ppp;
  Paug.block(m + nr, m + nr, 3, 3) = Pfpp;

  FilterState out;
  out.mean = augment_mean(state.mean, z);
  out.cov = symmetrized(Paug);
  return out;
}

}  // namespace objslam::riekf
