#pragma once

// Observability matrices built from the Jacobians a filter actually used, and
// numerical checks of the unobservable subspaces of both filters.

#include <string>
#include <vector>

#include "objslam/lie.hpp"

namespace objslam {

enum class JacobianMode { Estimated, GroundTruth };

std::string_view mode_name(JacobianMode m);
JacobianMode parse_mode(std::string_view s);

/// One time step: H stacks every observation Jacobian used at the step (zero
/// rows when nothing was observed); F propagates from this step to the next.
struct JacobianStep {
  MatX F;
  MatX H;
};

struct JacobianLog {
  std::string filter = "riekf";
  JacobianMode mode = JacobianMode::Estimated;
  std::size_t num_features = 0;
  std::vector<JacobianStep> steps;
  /// True initial robot position and true feature positions in state order;
  /// the ground-truth standard-EKF basis depends on them.
  Vec3 robot_anchor = Vec3::Zero();
  std::vector<Vec3> feature_anchors;

  std::size_t dim() const { return 6 + 6 * num_features; }
};

/// Rows H_k F_{k-1} ... F_0 stacked in step order.
MatX build_observability_matrix(const JacobianLog& log);
MatX build_observability_matrix(const JacobianLog& log, std::size_t num_steps);

struct SubspaceBasis {
  MatX basis;  // orthonormal columns
  std::size_t dim() const { return static_cast<std::size_t>(basis.cols()); }
};

/// 1e-8 * max(rows, cols).
double default_rank_tolerance(const MatX& m);

/// Right singular vectors whose singular value is below tol * sigma_max.
SubspaceBasis null_space(const MatX& m, double tol);
inline SubspaceBasis null_space(const MatX& m) { return null_space(m, default_rank_tolerance(m)); }

MatX orthonormalize(const MatX& columns);

/// || (I - B B^T) A ||_F / ||A||_F with B orthonormal; zero iff span(A) is in span(B).
double containment_residual(const SubspaceBasis& B, const MatX& A);

/// Invariant-filter gauge: [I..I; 0..0] rotation columns, [0..0; I..I] position columns.
MatX invariant_unobservable_basis(std::size_t num_features);

/// Standard-EKF translation gauge [0; 0; I; I].
MatX standard_translation_basis(std::size_t num_features);

/// Standard-EKF rotation gauge about the world origin: rotation rows I, position
/// rows -(p)^ for the initial robot position and each feature position.
MatX standard_rotation_basis(const Vec3& robot_anchor, const std::vector<Vec3>& feature_anchors);

struct ObservabilityReport {
  std::string check;
  std::string filter;
  std::string mode;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t steps = 0;
  double tolerance = 0.0;
  std::size_t null_dim = 0;
  std::size_t expected_dim = 0;
  /// ||O N|| / ||O|| for the analytic basis N.
  double residual = 0.0;
  /// Distance of the analytic basis from the computed null space.
  double containment = 0.0;
  bool passed = false;
  std::vector<std::string> notes;
};

/// Expected null dimension 6 with the invariant gauge basis.
ObservabilityReport theorem1_check(const JacobianLog& log, double basis_tol = 1e-8,
                                   double rank_tol = -1.0);

/// Ground-truth mode: dimension 6 containing translation and rotation gauges.
/// Estimated mode: dimension 3, the translation gauge only.
ObservabilityReport theorem2_check(const JacobianLog& log, JacobianMode mode,
                                   double basis_tol = 1e-8, double rank_tol = -1.0);

}  // namespace objslam
