#pragma once

// Runs one filter variant over a stream of measurement records.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "objslam/filter.hpp"
#include "objslam/io.hpp"
#include "objslam/metrics.hpp"
#include "objslam/observability.hpp"

namespace objslam {

enum class FilterKind { RiEkf, StdEkf, Ideal };

std::string_view filter_name(FilterKind k);
FilterKind parse_filter(std::string_view s);

struct FilterConfig {
  FilterKind kind = FilterKind::RiEkf;
  bool robust = false;
  bool joseph = false;
  double gate_sigma = 3.0;
  bool record_jacobians = false;

  /// "riekf", "robust-riekf", "ideal", ...
  std::string label() const;
};

struct GateLogEntry {
  std::size_t step = 0;
  FeatureId feature_id;
  bool accepted = true;
  std::array<double, 6> margins{};
  std::string diagnostic;
};

/// Filter state plus the bookkeeping every variant shares: feature
/// initialization on first sighting, optional gating, Jacobian recording.
class FilterRunner {
 public:
  explicit FilterRunner(FilterConfig cfg, GroupState initial = GroupState::identity());

  /// Moves the estimate by one odometry increment. The ideal variant needs
  /// the true states before and after the move.
  void propagate(const Odometry& u, const GroupState* truth_now = nullptr,
                 const GroupState* truth_next = nullptr);

  /// Initializes an unseen feature, otherwise gates (robust mode) and
  /// updates. Updates whose innovation covariance cannot be inverted are
  /// skipped and logged.
  void observe(std::size_t step, const PoseObservation& z, const GroupState* truth = nullptr);

  const FilterConfig& config() const { return cfg_; }
  const FilterState& state() const { return state_; }
  const std::vector<GateLogEntry>& gate_log() const { return gate_log_; }
  std::size_t skipped_updates() const { return skipped_; }
  /// Jacobians since the last change of the feature count, including the
  /// observations of the current step.
  JacobianLog jacobians() const;
  /// Step at which the Jacobian log starts.
  std::size_t jacobian_start() const { return jac_start_; }

 private:
  void update(std::size_t step, const PoseObservation& z, const GroupState* truth);

  FilterConfig cfg_;
  FilterState state_;
  std::vector<GateLogEntry> gate_log_;
  std::size_t skipped_ = 0;
  std::size_t step_ = 0;

  void record_F(const MatX& F);
  void record_H(const MatX& H);
  void restart_jacobians(const GroupState* truth);

  JacobianLog jac_;
  std::size_t jac_start_ = 0;
  JacobianStep pending_;
  bool pending_open_ = false;
};

/// R^u = I and p^u the mean of the body-frame translations between
/// consecutive poses in `history`; zero motion with fewer than two poses.
Odometry synthesize_constant_velocity_odometry(std::span<const GroupState> history,
                                               const Mat6& noise_cov);

/// Per-block sums at one step, ready to be reduced over runs.
struct BlockAccumulator {
  double sq_error = 0.0;     // standard-error squared norms
  std::size_t sq_count = 0;  // samples behind sq_error
  double nees_sum = 0.0;     // e^T P^-1 e
  std::size_t nees_dof = 0;  // sum of block dimensions
  std::size_t nees_skipped = 0;

  void merge(const BlockAccumulator& o);
  double rmse() const;
  double nees() const;
};

using StepMetrics = std::array<BlockAccumulator, 6>;  // indexed like kAllBlocks

/// NEES in the filter's own error convention, RMSE in the standard one.
StepMetrics evaluate_step(FilterKind kind, const GroupState& truth, const FilterState& est);

struct ReplayOptions {
  /// Synthesize constant-velocity odometry for steps without odom records.
  bool constant_velocity = false;
  Mat6 cv_noise = Mat6::Identity() * 1e-4;
  /// Divergence rule: estimation error norm above this.
  double divergence_error = 1e3;
  /// Compute per-step metrics when ground truth is available.
  bool metrics = true;
  /// Keep every estimated state (trajectory export).
  bool keep_trajectory = false;
};

struct ReplayResult {
  FilterConfig config;
  FilterState final_state;
  std::optional<GroupState> final_truth;
  std::size_t first_step = 0;
  std::size_t last_step = 0;
  std::vector<GroupState> trajectory;
  std::vector<StepMetrics> metrics;  // one per step from first_step
  std::vector<GateLogEntry> gate_log;
  std::size_t skipped_updates = 0;
  bool diverged = false;
  std::string divergence_reason;
  JacobianLog jacobians;
};

/// Runs one filter over records grouped by step. Per step: truth rows, then
/// odometry (or the constant-velocity substitute), then observations in file
/// order. An empty record list yields an empty result.
ReplayResult run_filter(const FilterConfig& cfg, std::span<const MeasurementRecord> records,
                        const ReplayOptions& opts = {});

}  // namespace objslam
