#include "objslam/observability.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>

#include "objslam/errors.hpp"

namespace objslam {

std::string_view mode_name(JacobianMode m) {
  return m == JacobianMode::Estimated ? "estimated" : "ground-truth";
}

JacobianMode parse_mode(std::string_view s) {
  if (s == "estimated") return JacobianMode::Estimated;
  if (s == "ground-truth" || s == "ideal") return JacobianMode::GroundTruth;
  throw Error("unknown Jacobian mode '" + std::string(s) + "'");
}

MatX build_observability_matrix(const JacobianLog& log) {
  return build_observability_matrix(log, log.steps.size());
}

MatX build_observability_matrix(const JacobianLog& log, std::size_t num_steps) {
  if (num_steps == 0 || num_steps > log.steps.size()) {
    throw DimensionMismatch("observability matrix needs between 1 and " +
                            std::to_string(log.steps.size()) + " steps");
  }
  const auto n = static_cast<Eigen::Index>(log.dim());
  Eigen::Index rows = 0;
  for (std::size_t k = 0; k < num_steps; ++k) {
    const auto& s = log.steps[k];
    if (s.H.rows() > 0 && s.H.cols() != n) {
      throw DimensionMismatch("H at step " + std::to_string(k) + " has " +
                              std::to_string(s.H.cols()) + " columns, expected " +
                              std::to_string(n));
    }
    if (k + 1 < num_steps && (s.F.rows() != n || s.F.cols() != n)) {
      throw DimensionMismatch("F at step " + std::to_string(k) + " has wrong shape");
    }
    rows += s.H.rows();
  }

  MatX O(rows, n);
  MatX chain = MatX::Identity(n, n);  // F_{k-1} ... F_0
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < num_steps; ++k) {
    const auto& s = log.steps[k];
    if (s.H.rows() > 0) {
      O.middleRows(r, s.H.rows()) = s.H * chain;
      r += s.H.rows();
    }
    if (k + 1 < num_steps) chain = s.F * chain;
  }
  return O;
}

double default_rank_tolerance(const MatX& m) {
  return 1e-8 * static_cast<double>(std::max(m.rows(), m.cols()));
}

SubspaceBasis null_space(const MatX& m, double tol) {
  const Eigen::Index n = m.cols();
  if (m.rows() == 0) return {MatX::Identity(n, n)};
  Eigen::JacobiSVD<MatX> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (smax > 0.0 && !(sv(i) < tol * smax)) ++rank;
  }
  return {svd.matrixV().rightCols(n - rank)};
}

MatX orthonormalize(const MatX& columns) {
  Eigen::HouseholderQR<MatX> qr(columns);
  return qr.householderQ() * MatX::Identity(columns.rows(), columns.cols());
}

double containment_residual(const SubspaceBasis& B, const MatX& A) {
  const double norm = A.norm();
  if (norm == 0.0) return 0.0;
  const MatX proj = B.basis * (B.basis.transpose() * A);
  return (A - proj).norm() / norm;
}

MatX invariant_unobservable_basis(std::size_t num_features) {
  const TangentLayout L{num_features};
  MatX N = MatX::Zero(static_cast<Eigen::Index>(L.dim()), 6);
  N.block<3, 3>(L.robot_rot(), 0).setIdentity();
  N.block<3, 3>(L.robot_pos(), 3).setIdentity();
  for (std::size_t j = 0; j < num_features; ++j) {
    N.block<3, 3>(L.feature_rot(j), 0).setIdentity();
    N.block<3, 3>(L.feature_pos(j), 3).setIdentity();
  }
  return N;
}

MatX standard_translation_basis(std::size_t num_features) {
  const TangentLayout L{num_features};
  MatX N = MatX::Zero(static_cast<Eigen::Index>(L.dim()), 3);
  N.block<3, 3>(L.robot_pos(), 0).setIdentity();
  for (std::size_t j = 0; j < num_features; ++j) N.block<3, 3>(L.feature_pos(j), 0).setIdentity();
  return N;
}

MatX standard_rotation_basis(const Vec3& robot_anchor, const std::vector<Vec3>& feature_anchors) {
  const TangentLayout L{feature_anchors.size()};
  MatX N = MatX::Zero(static_cast<Eigen::Index>(L.dim()), 3);
  N.block<3, 3>(L.robot_rot(), 0).setIdentity();
  N.block<3, 3>(L.robot_pos(), 0) = -skew(robot_anchor);
  for (std::size_t j = 0; j < feature_anchors.size(); ++j) {
    N.block<3, 3>(L.feature_rot(j), 0).setIdentity();
    N.block<3, 3>(L.feature_pos(j), 0) = -skew(feature_anchors[j]);
  }
  return N;
}

namespace {

ObservabilityReport evaluate(const JacobianLog& log, JacobianMode mode, const MatX& analytic,
                             std::size_t expected, double basis_tol, double rank_tol,
                             std::string check) {
  ObservabilityReport rep;
  rep.check = std::move(check);
  rep.filter = log.filter;
  rep.mode = std::string(mode_name(mode));
  rep.steps = log.steps.size();
  const MatX O = build_observability_matrix(log);
  rep.rows = static_cast<std::size_t>(O.rows());
  rep.cols = static_cast<std::size_t>(O.cols());
  rep.tolerance = rank_tol > 0.0 ? rank_tol : default_rank_tolerance(O);
  const SubspaceBasis N = null_space(O, rep.tolerance);
  rep.null_dim = N.dim();
  rep.expected_dim = expected;
  const double onorm = O.norm();
  rep.residual = onorm > 0.0 ? (O * analytic).norm() / onorm : 0.0;
  rep.containment = containment_residual(N, analytic);
  rep.passed = rep.null_dim == expected && rep.residual < basis_tol && rep.containment < basis_tol;
  if (rep.null_dim != expected) {
    rep.notes.push_back("null-space dimension " + std::to_string(rep.null_dim) + " != expected " +
                        std::to_string(expected));
  }
  if (rep.residual >= basis_tol) rep.notes.push_back("analytic basis not annihilated");
  if (rep.containment >= basis_tol) rep.notes.push_back("analytic basis not inside null space");
  return rep;
}

}  // namespace

ObservabilityReport theorem1_check(const JacobianLog& log, double basis_tol, double rank_tol) {
  return evaluate(log, log.mode, invariant_unobservable_basis(log.num_features), 6, basis_tol, rank_tol,
                  "invariant-gauge");
}

ObservabilityReport theorem2_check(const JacobianLog& log, JacobianMode mode, double basis_tol,
                                   double rank_tol) {
  if (mode == JacobianMode::Estimated) {
    return evaluate(log, mode, standard_translation_basis(log.num_features), 3, basis_tol, rank_tol,
                    "standard-gauge");
  }
  if (log.feature_anchors.size() != log.num_features) {
    throw DimensionMismatch("ground-truth check needs one anchor per feature");
  }
  MatX basis(static_cast<Eigen::Index>(log.dim()), 6);
  basis << standard_translation_basis(log.num_features),
      standard_rotation_basis(log.robot_anchor, log.feature_anchors);
  return evaluate(log, mode, basis, 6, basis_tol, rank_tol, "standard-gauge");
}

}  // namespace objslam
