#pragma once

// Synthetic world: a robot driving a horizontal circle among object
// features, measuring noisy odometry and range-gated relative object poses.

#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "objslam/filter.hpp"

namespace objslam {

using Rng = std::mt19937_64;

struct SimConfig {
  std::size_t num_features = 6;
  std::size_t loops = 25;
  double linear_speed = 0.1;                        // m/s
  double angular_speed = std::numbers::pi / 40.0;   // rad/s
  double step_dt = 1.0;                             // s
  double sense_min = 0.5;                           // m
  double sense_max = 2.0;                           // m
  Mat6 sigma = Mat6::Identity() * 0.1 * 0.1;        // odometry noise
  Mat6 omega = Mat6::Identity() * 0.1 * 0.1;        // observation noise
  std::uint64_t seed = 1;
  std::size_t monte_carlo_runs = 50;

  /// v / w; 4/pi m for the defaults, i.e. 8 m per loop.
  double circle_radius() const;
  std::size_t steps_per_loop() const;
  std::size_t num_steps() const { return loops * steps_per_loop(); }
  /// Throws Error on non-positive sizes or an empty sensing annulus.
  void validate() const;
};

struct World {
  std::vector<FeatureId> ids;
  std::vector<Rot3> rots;
  std::vector<Vec3> pos;

  std::size_t size() const { return ids.size(); }
};

/// Features spread at uniform angles around the circle centre, at sampled
/// radii and heights keeping each one inside the sensing annulus for part of
/// every loop, with uniformly random orientations.
World generate_world(const SimConfig& cfg, Rng& rng);

/// World generated from the configuration seed alone.
World default_world(const SimConfig& cfg);

/// Uniformly distributed rotation.
Rot3 random_rotation(Rng& rng);

/// Zero-mean Gaussian with covariance `cov` (PSD; zero gives zero).
VecX sample_gaussian(const MatX& cov, Rng& rng);

/// Noise-free per-step odometry of the circular motion, constant in time.
Odometry step_odometry(const SimConfig& cfg);

/// Draws w ~ N(0, Sigma) and returns (exp(w^R) R^u, p^u + w^p).
Odometry sample_noisy_odometry(const Odometry& u, const Mat6& sigma, Rng& rng,
                               Vec6* drawn = nullptr);

/// Observations of every feature whose distance to the robot lies in
/// [sense_min, sense_max]: R^z = exp(v^R) Rr^T Rf, p^z = Rr^T (pf - pr) + v^p.
std::vector<PoseObservation> sample_observations(const GroupState& truth, const SimConfig& cfg,
                                                 Rng& rng);

struct GroundTruthTrace {
  std::vector<GroupState> states;                 // steps 0..N, all features
  std::vector<Odometry> odometry;                 // noise-free, N entries
  std::vector<std::vector<FeatureId>> visible;    // N + 1 entries
};

struct Simulation {
  GroundTruthTrace truth;
  /// measured_odometry[n] moves step n to step n+1.
  std::vector<Odometry> measured_odometry;
  /// Odometry noise draws: true = measured with the draw removed.
  std::vector<Vec6> odometry_noise;
  std::vector<std::vector<PoseObservation>> observations;  // N + 1 entries
};

/// One trace. The robot starts at the identity heading along +x; the circle
/// centre is at (0, radius, 0).
Simulation simulate(const SimConfig& cfg, const World& world, std::uint64_t run_seed);

/// Initial true state holding every world feature.
GroupState initial_truth(const World& world);

}  // namespace objslam
