#include "objslam/filter.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <sstream>

#include "objslam/errors.hpp"

namespace objslam {

void FilterState::validate(double sym_tol, double eig_tol) const {
  mean.validate();
  const auto n = static_cast<Eigen::Index>(mean.dim());
  if (cov.rows() != n || cov.cols() != n) {
    throw DimensionMismatch("covariance is " + std::to_string(cov.rows()) + "x" +
                            std::to_string(cov.cols()) + ", state needs " + std::to_string(n));
  }
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > sym_tol) {
    throw SingularCovariance("covariance is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<MatX> es(cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -eig_tol) {
    throw SingularCovariance("covariance has a negative eigenvalue");
  }
}

FilterState FilterState::anchored(GroupState mean) {
  FilterState s;
  const auto n = static_cast<Eigen::Index>(mean.dim());
  s.mean = std::move(mean);
  s.cov = MatX::Zero(n, n);
  return s;
}

GroupState propagate_mean(const GroupState& x, const Odometry& u) {
  GroupState out = x;
  out.robot_rot = x.robot_rot * u.rot;
  out.robot_pos = x.robot_rot * u.pos + x.robot_pos;
  return out;
}

std::pair<Rot3, Vec3> predict_observation(const GroupState& x, std::size_t j) {
  return {x.robot_rot.transpose() * x.feature_rots[j],
          x.robot_rot.transpose() * (x.feature_pos[j] - x.robot_pos)};
}

Vec6 observation_residual(const GroupState& x, std::size_t j, const PoseObservation& z) {
  Vec6 y;
  y.head<3>() = so3_log(z.rot * x.feature_rots[j].transpose() * x.robot_rot);
  y.tail<3>() = z.pos - x.robot_rot.transpose() * (x.feature_pos[j] - x.robot_pos);
  return y;
}

GroupState augment_mean(const GroupState& x, const PoseObservation& z) {
  GroupState out = x;
  out.feature_rots.push_back(x.robot_rot * z.rot);
  out.feature_pos.push_back(x.robot_pos + x.robot_rot * z.pos);
  out.feature_ids.push_back(z.feature_id);
  return out;
}

MatX augment_covariance(const MatX& P, std::size_t num_features, const MatX& AP, const Mat6& D) {
  const auto K = static_cast<Eigen::Index>(num_features);
  const Eigen::Index nr = 3 + 3 * K;  // old rotation section length
  const Eigen::Index n = 2 * nr;
  // Old index -> new index; the new feature takes slots nr..nr+2 and n+3..n+5.
  Eigen::VectorXi map(n);
  for (Eigen::Index i = 0; i < n; ++i) map(i) = static_cast<int>(i < nr ? i : i + 3);
  const Eigen::Index new_rot = nr;
  const Eigen::Index new_pos = n + 3;

  MatX out = MatX::Zero(n + 6, n + 6);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) out(map(r), map(c)) = P(r, c);
  }
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < 3; ++r) {
      out(new_rot + r, map(c)) = AP(r, c);
      out(map(c), new_rot + r) = AP(r, c);
      out(new_pos + r, map(c)) = AP(3 + r, c);
      out(map(c), new_pos + r) = AP(3 + r, c);
    }
  }
  out.block<3, 3>(new_rot, new_rot) = D.block<3, 3>(0, 0);
  out.block<3, 3>(new_rot, new_pos) = D.block<3, 3>(0, 3);
  out.block<3, 3>(new_pos, new_rot) = D.block<3, 3>(3, 0);
  out.block<3, 3>(new_pos, new_pos) = D.block<3, 3>(3, 3);
  return out;
}

VecX kalman_correct(MatX& P, const Innovation& inn, const UpdateOptions& opts) {
  const Eigen::SelfAdjointEigenSolver<Mat6> es(inn.S, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > opts.max_condition) {
    std::ostringstream msg;
    msg << "innovation covariance ill-conditioned (eigenvalues " << lo << " .. " << hi << ")";
    throw IllConditionedInnovation(msg.str());
  }
  const MatX PHt = P * inn.H.transpose();
  const MatX gain = PHt * inn.S.inverse();
  if (opts.joseph) {
    const auto n = P.rows();
    const MatX IKH = MatX::Identity(n, n) - gain * inn.H;
    const Mat6 omega = inn.S - inn.H * PHt;
    P = IKH * P * IKH.transpose() + gain * omega * gain.transpose();
  } else {
    // (I - K H) P without forming the n x n factor.
    P -= gain * PHt.transpose();
  }
  P = symmetrized(P);
  return gain * inn.y;
}

}  // namespace objslam
