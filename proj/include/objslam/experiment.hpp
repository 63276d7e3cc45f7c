#pragma once

// Monte-Carlo experiments over simulated traces and their file outputs.

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "objslam/runner.hpp"
#include "objslam/simulator.hpp"

namespace objslam {

/// Odometry, observations and ground truth of one simulated trace as log
/// records. Truth rows carry the robot pose every step and the feature poses
/// at step 0.
std::vector<MeasurementRecord> to_records(const Simulation& sim, bool with_truth = true);

using ObservationKey = std::pair<std::size_t, FeatureId>;  // (step, feature)

/// Corrupts a `rate` fraction of the observation records in place by
/// `sigmas` standard deviations per component with random signs. The first
/// sighting of each feature initializes it and cannot be gated, so it is left
/// clean unless `corrupt_first_sightings`. Returns the corrupted
/// (step, feature) pairs.
std::set<ObservationKey> inject_outliers(std::vector<MeasurementRecord>& records, double rate,
                                         double sigmas, Rng& rng,
                                         bool corrupt_first_sightings = false);

struct ExperimentConfig {
  SimConfig sim;
  std::vector<FilterConfig> filters;
  double outlier_rate = 0.0;
  double outlier_sigmas = 10.0;
  bool corrupt_first_sightings = false;
  /// Worker threads; 0 picks the hardware concurrency.
  std::size_t threads = 0;
  ReplayOptions replay;
};

struct GatingStats {
  std::size_t decisions = 0;
  std::size_t rejected = 0;
  std::size_t injected = 0;
  std::size_t injected_rejected = 0;

  void merge(const GatingStats& o);
  double rejection_rate() const;
  double injected_rejection_rate() const;
};

struct RunOutcome {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string reason;
  FilterState final_state;
  GroupState final_truth;
  GatingStats gating;
};

struct FilterSummary {
  FilterConfig config;
  std::vector<StepMetrics> per_step;  // reduced over non-diverged runs
  std::vector<RunOutcome> runs;       // in run order
  std::size_t diverged = 0;
  GatingStats gating;

  /// Final-step NEES / RMSE of a block over non-diverged runs.
  double final_nees(Block b) const;
  double final_rmse(Block b) const;
};

struct ExperimentResult {
  SimConfig sim;
  World world;
  std::vector<FilterSummary> filters;

  const FilterSummary& find(const std::string& label) const;
};

/// Runs `sim.monte_carlo_runs` independent traces (run i uses seed
/// sim.seed + i) through every configured filter. The result does not depend
/// on the thread count.
ExperimentResult run_monte_carlo(const ExperimentConfig& cfg);

/// Writes metrics_<label>.csv (step,block,rmse,nees), summary.txt and
/// summary.json into `dir`, creating it if needed.
void write_experiment(const ExperimentResult& res, const std::string& dir);

std::string summary_table(const ExperimentResult& res);

/// Estimated trajectory (step, robot pose) and final feature poses as CSV.
void write_trajectory_csv(const ReplayResult& res, const std::string& path);
void write_features_csv(const ReplayResult& res, const std::string& path);

/// Small world for observability checks: K features close to the circle
/// centre, visible from every pose, so all are initialized at step 0.
World observability_world(const SimConfig& cfg, std::size_t num_features, Rng& rng);

/// Jacobians recorded by one noisy run of `kind` over `steps` steps.
JacobianLog collect_jacobians(FilterKind kind, std::size_t num_features, std::size_t steps,
                              std::uint64_t seed);

}  // namespace objslam
