#pragma once

// On-disk formats.
//
// Measurement log: one JSON object per line,
//   {"step":3,"kind":"obs","feature_id":"obj2","rotation":[w,x,y,z],
//    "position":[x,y,z],"cov":[21 values]}
// kind is "odom" (motion from step-1 to step), "obs" (relative object pose)
// or "truth" (ground-truth pose; feature_id empty for the robot, no cov).
// cov is the row-major upper triangle of the 6x6 covariance, rotation block
// first.
//
// Jacobian log: plain text, a header followed by row-major matrices:
//   objslam-jacobian-log 1
//   filter riekf
//   mode estimated
//   features K
//   robot_anchor x y z
//   feature_anchor x y z        (K lines)
//   steps N
//   F rows cols <values...>     (per step: F then H)
//   H rows cols <values...>

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "objslam/filter.hpp"
#include "objslam/observability.hpp"

namespace objslam {

enum class RecordKind { Odom, Obs, Truth };

struct MeasurementRecord {
  std::size_t step = 0;
  RecordKind kind = RecordKind::Obs;
  FeatureId feature_id;
  Eigen::Vector4d rotation{1.0, 0.0, 0.0, 0.0};  // w, x, y, z
  Vec3 position = Vec3::Zero();
  std::array<double, 21> cov{};
};

std::array<double, 21> pack_upper(const Mat6& m);
Mat6 unpack_upper(const std::array<double, 21>& v);

MeasurementRecord make_record(std::size_t step, const Odometry& u);
MeasurementRecord make_record(std::size_t step, const PoseObservation& z);
MeasurementRecord make_truth_record(std::size_t step, const FeatureId& id, const Rot3& R,
                                    const Vec3& p);

Odometry to_odometry(const MeasurementRecord& r);
PoseObservation to_observation(const MeasurementRecord& r);

/// Throws ParseError with the 1-based line number on malformed input:
/// unknown kind, missing fields, quaternion norm off by more than 1e-9,
/// non-PSD covariance or decreasing step numbers. Blank lines are skipped.
std::vector<MeasurementRecord> read_measurement_log(std::istream& in);
std::vector<MeasurementRecord> read_measurement_log(const std::string& path);
void write_measurement_log(std::ostream& out, std::span<const MeasurementRecord> records);
void write_measurement_log(const std::string& path, std::span<const MeasurementRecord> records);

void write_jacobian_log(std::ostream& out, const JacobianLog& log);
void write_jacobian_log(const std::string& path, const JacobianLog& log);
JacobianLog read_jacobian_log(std::istream& in);
JacobianLog read_jacobian_log(const std::string& path);

}  // namespace objslam
