#pragma once

// Reference implementations used only by the tests. They share no code with
// the library: the robot pose and every position are embedded as one
// homogeneous (4+K)x(4+K) matrix, the object rotations as separate 3x3
// blocks, and exp/log come from Eigen's general matrix functions.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <random>
#include <string>
#include <vector>

#include "objslam/lie.hpp"

namespace oracle {

using objslam::GroupState;
using objslam::MatX;
using objslam::Mat3;
using objslam::Vec3;
using objslam::VecX;

inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v(2), v(1), v(2), 0.0, -v(0), -v(1), v(0), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

inline Mat3 rot_exp(const Vec3& phi) {
  const double a = phi.norm();
  if (a == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(a, phi / a).toRotationMatrix();
}

inline Vec3 rot_log(const Mat3& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

inline Mat3 left_jacobian_series(const Vec3& phi, int terms = 40) {
  Mat3 sum = Mat3::Zero();
  Mat3 power = Mat3::Identity();
  double fact = 1.0;
  for (int k = 0; k < terms; ++k) {
    fact *= static_cast<double>(k + 1);
    sum += power / fact;
    power = power * hat(phi);
  }
  return sum;
}

/// Homogeneous matrix: [Rr, pr, pf_1..pf_K; 0, I].
struct Embedded {
  MatX T;
  std::vector<Mat3> feature_rots;
  std::vector<std::string> ids;

  std::size_t K() const { return feature_rots.size(); }
};

inline Embedded embed(const GroupState& x) {
  const auto K = static_cast<Eigen::Index>(x.num_features());
  Embedded e;
  e.T = MatX::Identity(4 + K, 4 + K);
  e.T.topLeftCorner<3, 3>() = x.robot_rot;
  e.T.block<3, 1>(0, 3) = x.robot_pos;
  for (Eigen::Index j = 0; j < K; ++j) e.T.block<3, 1>(0, 4 + j) = x.feature_pos[j];
  e.feature_rots = x.feature_rots;
  e.ids = x.feature_ids;
  return e;
}

inline GroupState unembed(const Embedded& e) {
  GroupState x;
  x.robot_rot = e.T.topLeftCorner<3, 3>();
  x.robot_pos = e.T.block<3, 1>(0, 3);
  for (std::size_t j = 0; j < e.K(); ++j) {
    x.feature_pos.push_back(e.T.block<3, 1>(0, 4 + static_cast<Eigen::Index>(j)));
  }
  x.feature_rots = e.feature_rots;
  x.feature_ids = e.ids;
  return x;
}

inline GroupState compose(const GroupState& a, const GroupState& b) {
  Embedded ea = embed(a), eb = embed(b);
  Embedded out = ea;
  out.T = ea.T * eb.T;
  for (std::size_t j = 0; j < ea.K(); ++j) out.feature_rots[j] = ea.feature_rots[j] * eb.feature_rots[j];
  return unembed(out);
}

inline GroupState inverse(const GroupState& a) {
  Embedded e = embed(a);
  e.T = e.T.inverse().eval();
  for (auto& R : e.feature_rots) R = R.transpose().eval();
  return unembed(e);
}

/// Tangent layout [rot_r, rot_f1..K, pos_r, pos_f1..K].
inline GroupState exp(const VecX& xi, const std::vector<std::string>& ids) {
  const auto K = static_cast<Eigen::Index>(ids.size());
  MatX A = MatX::Zero(4 + K, 4 + K);
  A.topLeftCorner<3, 3>() = hat(xi.segment<3>(0));
  A.block<3, 1>(0, 3) = xi.segment<3>(3 + 3 * K);
  for (Eigen::Index j = 0; j < K; ++j) A.block<3, 1>(0, 4 + j) = xi.segment<3>(6 + 3 * K + 3 * j);
  Embedded e;
  e.T = A.exp();
  e.ids = ids;
  for (Eigen::Index j = 0; j < K; ++j) {
    const Mat3 a = hat(xi.segment<3>(3 + 3 * j));
    e.feature_rots.push_back(a.exp());
  }
  return unembed(e);
}

inline VecX log(const GroupState& x) {
  const Embedded e = embed(x);
  const auto K = static_cast<Eigen::Index>(e.K());
  const MatX A = e.T.log();
  VecX xi(6 + 6 * K);
  xi.segment<3>(0) = vee(A.topLeftCorner<3, 3>());
  xi.segment<3>(3 + 3 * K) = A.block<3, 1>(0, 3);
  for (Eigen::Index j = 0; j < K; ++j) {
    xi.segment<3>(3 + 3 * j) = vee(Mat3(e.feature_rots[j].log()));
    xi.segment<3>(6 + 3 * K + 3 * j) = A.block<3, 1>(0, 4 + j);
  }
  return xi;
}

/// log(truth (+) est^{-1}) through the embedding.
inline VecX invariant_error(const GroupState& truth, const GroupState& est) {
  return log(compose(truth, inverse(est)));
}

/// Per-block errors: rotation log(R R_hat^T), position difference.
inline VecX standard_error(const GroupState& truth, const GroupState& est) {
  const auto K = static_cast<Eigen::Index>(est.num_features());
  VecX e(6 + 6 * K);
  e.segment<3>(0) = rot_log(truth.robot_rot * est.robot_rot.transpose());
  e.segment<3>(3 + 3 * K) = truth.robot_pos - est.robot_pos;
  for (Eigen::Index j = 0; j < K; ++j) {
    e.segment<3>(3 + 3 * j) = rot_log(truth.feature_rots[j] * est.feature_rots[j].transpose());
    e.segment<3>(6 + 3 * K + 3 * j) = truth.feature_pos[j] - est.feature_pos[j];
  }
  return e;
}

/// Truth from an estimate and a standard error vector.
inline GroupState standard_perturb(const GroupState& est, const VecX& e) {
  const auto K = static_cast<Eigen::Index>(est.num_features());
  GroupState x = est;
  x.robot_rot = rot_exp(e.segment<3>(0)) * est.robot_rot;
  x.robot_pos += e.segment<3>(3 + 3 * K);
  for (Eigen::Index j = 0; j < K; ++j) {
    x.feature_rots[j] = rot_exp(e.segment<3>(3 + 3 * j)) * est.feature_rots[j];
    x.feature_pos[j] += e.segment<3>(6 + 3 * K + 3 * j);
  }
  return x;
}

inline GroupState invariant_perturb(const GroupState& est, const VecX& xi) {
  return compose(exp(xi, est.feature_ids), est);
}

/// Robot moves by (Ru, pu) in its own frame.
inline GroupState move(const GroupState& x, const Mat3& Ru, const Vec3& pu) {
  GroupState out = x;
  out.robot_rot = x.robot_rot * Ru;
  out.robot_pos = x.robot_pos + x.robot_rot * pu;
  return out;
}

/// Relative pose of feature j seen from the robot, as a 6-vector residual
/// against a measurement (Rz, pz).
inline Eigen::Matrix<double, 6, 1> residual(const GroupState& x, std::size_t j, const Mat3& Rz,
                                            const Vec3& pz) {
  Eigen::Matrix<double, 6, 1> y;
  y.head<3>() = rot_log(Rz * (x.robot_rot.transpose() * x.feature_rots[j]).transpose());
  y.tail<3>() = pz - x.robot_rot.transpose() * (x.feature_pos[j] - x.robot_pos);
  return y;
}

/// Appends the feature observed at (Rz, pz) from the robot.
inline GroupState add_feature(const GroupState& x, const std::string& id, const Mat3& Rz,
                              const Vec3& pz) {
  GroupState out = x;
  out.feature_ids.push_back(id);
  out.feature_rots.push_back(x.robot_rot * Rz);
  out.feature_pos.push_back(x.robot_pos + x.robot_rot * pz);
  return out;
}

template <typename F>
MatX central_difference(F f, Eigen::Index n, double h = 1e-6) {
  const VecX f0 = f(VecX::Zero(n));
  MatX J(f0.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    VecX d = VecX::Zero(n);
    d(i) = h;
    J.col(i) = (f(d) - f(-d)) / (2.0 * h);
  }
  return J;
}

inline double rel_error(const MatX& a, const MatX& ref) {
  return (a - ref).norm() / std::max(ref.norm(), 1e-12);
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_vec(std::mt19937_64& rng, double s) {
  std::normal_distribution<double> n(0.0, s);
  return {n(rng), n(rng), n(rng)};
}

inline GroupState random_state(std::mt19937_64& rng, std::size_t K, double spread = 2.0) {
  GroupState x;
  x.robot_rot = random_rotation(rng);
  x.robot_pos = random_vec(rng, spread);
  for (std::size_t j = 0; j < K; ++j) {
    x.feature_ids.push_back("f" + std::to_string(j));
    x.feature_rots.push_back(random_rotation(rng));
    x.feature_pos.push_back(random_vec(rng, spread));
  }
  return x;
}

/// Tangent vector whose rotation parts stay below `max_angle`.
inline VecX random_tangent(std::mt19937_64& rng, std::size_t K, double max_angle = 2.5) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VecX xi(6 + 6 * K);
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = 2.0 * u(rng);
  for (std::size_t b = 0; b <= K; ++b) {
    auto seg = xi.segment<3>(static_cast<Eigen::Index>(3 * b));
    const double a = seg.norm();
    if (a > max_angle) seg *= max_angle / a;
  }
  return xi;
}

inline double max_diff(const GroupState& a, const GroupState& b) {
  double d = (a.robot_rot - b.robot_rot).cwiseAbs().maxCoeff();
  d = std::max(d, (a.robot_pos - b.robot_pos).cwiseAbs().maxCoeff());
  for (std::size_t j = 0; j < a.num_features(); ++j) {
    d = std::max(d, (a.feature_rots[j] - b.feature_rots[j]).cwiseAbs().maxCoeff());
    d = std::max(d, (a.feature_pos[j] - b.feature_pos[j]).cwiseAbs().maxCoeff());
  }
  return d;
}

/// Unobservable directions of the invariant error: global rotation and
/// translation applied to every component.
inline MatX invariant_gauge(std::size_t K) {
  const auto k = static_cast<Eigen::Index>(K);
  MatX N = MatX::Zero(6 + 6 * k, 6);
  for (Eigen::Index b = 0; b <= k; ++b) {
    N.block<3, 3>(3 * b, 0).setIdentity();
    N.block<3, 3>(3 + 3 * k + 3 * b, 3).setIdentity();
  }
  return N;
}

/// Standard-error gauge: translation columns and, when anchors are given,
/// rotation columns about the world origin. A small global rotation exp(t)
/// moves p to p + t^ p = p - p^ t.
inline MatX standard_gauge(std::size_t K, const Vec3* robot_anchor = nullptr,
                           const std::vector<Vec3>* feature_anchors = nullptr) {
  const auto k = static_cast<Eigen::Index>(K);
  const bool rot = robot_anchor && feature_anchors;
  MatX N = MatX::Zero(6 + 6 * k, rot ? 6 : 3);
  for (Eigen::Index b = 0; b <= k; ++b) N.block<3, 3>(3 + 3 * k + 3 * b, 0).setIdentity();
  if (rot) {
    for (Eigen::Index b = 0; b <= k; ++b) N.block<3, 3>(3 * b, 3).setIdentity();
    N.block<3, 3>(3 + 3 * k, 3) = -hat(*robot_anchor);
    for (Eigen::Index j = 0; j < k; ++j) N.block<3, 3>(6 + 3 * k + 3 * j, 3) = -hat((*feature_anchors)[j]);
  }
  return N;
}

/// Error in either convention: invariant (log(truth (+) est^-1)) or standard.
inline VecX error_of(bool invariant, const GroupState& truth, const GroupState& est) {
  return invariant ? oracle::invariant_error(truth, est) : oracle::standard_error(truth, est);
}

inline GroupState perturb(bool invariant, const GroupState& est, const VecX& e) {
  return invariant ? invariant_perturb(est, e) : standard_perturb(est, e);
}

using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Error after one odometry step when the truth carries error `e` and the
/// odometry noise was w = [w^R; w^p].
inline VecX propagated_error(bool invariant, const GroupState& est, const Mat3& Ru, const Vec3& pu,
                             const VecX& e, const Vec6& w) {
  const GroupState truth = perturb(invariant, est, e);
  return error_of(invariant, move(truth, rot_exp(w.head<3>()) * Ru, pu + w.tail<3>()),
                  move(est, Ru, pu));
}

/// Residual against the estimate of an observation of feature j taken from
/// the perturbed truth with noise v.
inline Vec6 innovation_of(bool invariant, const GroupState& est, std::size_t j, const VecX& e,
                          const Vec6& v) {
  const GroupState t = perturb(invariant, est, e);
  const Mat3 Rz = rot_exp(v.head<3>()) * t.robot_rot.transpose() * t.feature_rots[j];
  const Vec3 pz = t.robot_rot.transpose() * (t.feature_pos[j] - t.robot_pos) + v.tail<3>();
  return residual(est, j, Rz, pz);
}

/// Error of a feature initialized from (Rz, pz) when the prior carries error
/// `e` and the observation noise was v. Rows [rotation; position].
inline Vec6 new_feature_error(bool invariant, const GroupState& est, const Mat3& Rz, const Vec3& pz,
                              const VecX& e, const Vec6& v) {
  const GroupState t = perturb(invariant, est, e);
  const GroupState t_aug = add_feature(t, "new", rot_exp(-v.head<3>()) * Rz, pz - v.tail<3>());
  const GroupState e_aug = add_feature(est, "new", Rz, pz);
  const VecX full = error_of(invariant, t_aug, e_aug);
  const auto K = static_cast<Eigen::Index>(est.num_features());
  Vec6 out;
  out << full.segment<3>(3 + 3 * K), full.segment<3>(9 + 6 * K);
  return out;
}

/// Covariance after a feature is added, estimated from `samples` draws of the
/// prior error and the observation noise pushed through the exact maps.
inline MatX sampled_augmented_covariance(bool invariant, const GroupState& est, const MatX& P,
                                         const Mat3& Rz, const Vec3& pz, const MatX& Omega,
                                         std::size_t samples, std::mt19937_64& rng) {
  const auto n = P.rows();
  const Eigen::LLT<MatX> lp(P + 1e-15 * MatX::Identity(n, n));
  const Eigen::LLT<MatX> lo(Omega);
  const MatX Lp = lp.matrixL(), Lo = lo.matrixL();
  std::normal_distribution<double> g;
  const auto K = static_cast<Eigen::Index>(est.num_features());
  const Eigen::Index nr = 3 + 3 * K;
  MatX C = MatX::Zero(n + 6, n + 6);
  for (std::size_t s = 0; s < samples; ++s) {
    VecX a(n), b(6);
    for (Eigen::Index i = 0; i < n; ++i) a(i) = g(rng);
    for (Eigen::Index i = 0; i < 6; ++i) b(i) = g(rng);
    const VecX e = Lp * a;
    const Vec6 v = Lo * b;
    const Vec6 f = new_feature_error(invariant, est, Rz, pz, e, v);
    VecX full(n + 6);
    full << e.head(nr), f.head<3>(), e.tail(nr), f.tail<3>();
    C += full * full.transpose();
  }
  return C / static_cast<double>(samples);
}

}  // namespace oracle
