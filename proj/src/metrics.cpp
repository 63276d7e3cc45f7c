#include "objslam/metrics.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

#include "objslam/errors.hpp"

namespace objslam {

namespace {

const GroupState& align(const GroupState& truth, const GroupState& est, GroupState& scratch) {
  if (truth.feature_ids == est.feature_ids) return truth;
  scratch = truth.select(est.feature_ids);
  return scratch;
}

ErrorSample make_sample(const VecX& full, const FilterState& est, Block b, std::size_t feature) {
  const auto idx = block_indices(b, TangentLayout{est.mean.num_features()}, feature);
  ErrorSample s;
  s.block = b;
  s.e = full(idx);
  s.P = est.cov(idx, idx);
  return s;
}

}  // namespace

std::string_view block_name(Block b) {
  switch (b) {
    case Block::RobotRot: return "robot_rotation";
    case Block::RobotPos: return "robot_position";
    case Block::RobotPose: return "robot_pose";
    case Block::FeatureRot: return "feature_rotation";
    case Block::FeaturePos: return "feature_position";
    case Block::FeaturePose: return "feature_pose";
  }
  return "unknown";
}

bool is_feature_block(Block b) {
  return b == Block::FeatureRot || b == Block::FeaturePos || b == Block::FeaturePose;
}

std::vector<Eigen::Index> block_indices(Block b, const TangentLayout& layout, std::size_t feature) {
  const auto add = [](std::vector<Eigen::Index>& v, std::size_t start) {
    for (std::size_t k = 0; k < 3; ++k) v.push_back(static_cast<Eigen::Index>(start + k));
  };
  if (is_feature_block(b) && feature >= layout.num_features) {
    throw MissingFeature("feature index " + std::to_string(feature) + " out of range");
  }
  std::vector<Eigen::Index> idx;
  switch (b) {
    case Block::RobotRot: add(idx, layout.robot_rot()); break;
    case Block::RobotPos: add(idx, layout.robot_pos()); break;
    case Block::RobotPose:
      add(idx, layout.robot_rot());
      add(idx, layout.robot_pos());
      break;
    case Block::FeatureRot: add(idx, layout.feature_rot(feature)); break;
    case Block::FeaturePos: add(idx, layout.feature_pos(feature)); break;
    case Block::FeaturePose:
      add(idx, layout.feature_rot(feature));
      add(idx, layout.feature_pos(feature));
      break;
  }
  return idx;
}

double nees(std::span<const ErrorSample> samples) {
  if (samples.empty()) throw DimensionMismatch("nees needs at least one sample");
  const auto d = samples.front().e.size();
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.e.size() != d || s.P.rows() != d || s.P.cols() != d) {
      throw DimensionMismatch("nees samples differ in dimension");
    }
    const Eigen::LLT<MatX> llt(s.P);
    if (llt.info() != Eigen::Success) {
      throw SingularCovariance("singular covariance in NEES sample " + std::to_string(i) +
                               " (run " + std::to_string(s.run) + ", step " +
                               std::to_string(s.step) + ")");
    }
    total += s.e.dot(llt.solve(s.e));
  }
  return total / (static_cast<double>(samples.size()) * static_cast<double>(d));
}

VecX invariant_error(const GroupState& truth, const GroupState& est) {
  GroupState scratch;
  return group_log(group_between(align(truth, est, scratch), est));
}

VecX standard_error(const GroupState& truth, const GroupState& est) {
  GroupState scratch;
  const GroupState& t = align(truth, est, scratch);
  const TangentLayout L{est.num_features()};
  VecX e(L.dim());
  e.segment<3>(L.robot_rot()) = so3_log(t.robot_rot * est.robot_rot.transpose());
  e.segment<3>(L.robot_pos()) = t.robot_pos - est.robot_pos;
  for (std::size_t j = 0; j < L.num_features; ++j) {
    e.segment<3>(L.feature_rot(j)) = so3_log(t.feature_rots[j] * est.feature_rots[j].transpose());
    e.segment<3>(L.feature_pos(j)) = t.feature_pos[j] - est.feature_pos[j];
  }
  return e;
}

ErrorSample riekf_error(const GroupState& truth, const FilterState& est, Block b,
                        std::size_t feature) {
  return make_sample(invariant_error(truth, est.mean), est, b, feature);
}

ErrorSample std_error(const GroupState& truth, const FilterState& est, Block b,
                      std::size_t feature) {
  return make_sample(standard_error(truth, est.mean), est, b, feature);
}

std::pair<double, std::size_t> squared_error(const GroupState& truth, const GroupState& est,
                                             Block b) {
  const VecX e = standard_error(truth, est);
  const TangentLayout L{est.num_features()};
  if (!is_feature_block(b)) return {e(block_indices(b, L)).squaredNorm(), 1};
  double sum = 0.0;
  for (std::size_t j = 0; j < L.num_features; ++j) sum += e(block_indices(b, L, j)).squaredNorm();
  return {sum, L.num_features};
}

double rmse(std::span<const GroupState> truth, std::span<const GroupState> est, Block b) {
  if (truth.size() != est.size()) throw DimensionMismatch("rmse traces differ in length");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto [s, c] = squared_error(truth[i], est[i], b);
    sum += s;
    count += c;
  }
  return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

}  // namespace objslam
