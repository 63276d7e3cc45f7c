#pragma once

// Consistency (NEES) and accuracy (RMSE) measures.
//
// NEES of the invariant filter is computed in its own error convention
// (group log of truth (-) estimate). RMSE always uses the standard error
// (rotation log of R R_hat^T, position difference) so the filters are
// compared on the same footing.

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "objslam/filter.hpp"

namespace objslam {

enum class Block { RobotRot, RobotPos, RobotPose, FeatureRot, FeaturePos, FeaturePose };

inline constexpr std::array<Block, 6> kAllBlocks = {Block::RobotRot,   Block::RobotPos,
                                                    Block::RobotPose,  Block::FeatureRot,
                                                    Block::FeaturePos, Block::FeaturePose};

std::string_view block_name(Block b);
bool is_feature_block(Block b);

/// Indices of the block inside the (6+6K) error vector.
std::vector<Eigen::Index> block_indices(Block b, const TangentLayout& layout,
                                        std::size_t feature = 0);

struct ErrorSample {
  VecX e;
  MatX P;
  Block block = Block::RobotPose;
  std::size_t run = 0;
  std::size_t step = 0;
};

/// (1 / (m d)) sum e_i^T P_i^{-1} e_i. Throws SingularCovariance naming the
/// run/step of the offending sample.
double nees(std::span<const ErrorSample> samples);

/// Full error vectors in each convention. `truth` may hold more features than
/// the estimate; they are matched by id.
VecX invariant_error(const GroupState& truth, const GroupState& est);
VecX standard_error(const GroupState& truth, const GroupState& est);

ErrorSample riekf_error(const GroupState& truth, const FilterState& est, Block b,
                        std::size_t feature = 0);
ErrorSample std_error(const GroupState& truth, const FilterState& est, Block b,
                      std::size_t feature = 0);

/// Squared standard-error norm of a block, summed over all features for
/// feature blocks. Second member is the number of samples it covers.
std::pair<double, std::size_t> squared_error(const GroupState& truth, const GroupState& est,
                                             Block b);

/// RMSE of the standard error over aligned traces (every feature of every
/// pair is one sample for feature blocks).
double rmse(std::span<const GroupState> truth, std::span<const GroupState> est, Block b);

}  // namespace objslam
