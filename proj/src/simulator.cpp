#include "objslam/simulator.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

#include "objslam/errors.hpp"

namespace objslam {

double SimConfig::circle_radius() const {
  return angular_speed > 0.0 ? linear_speed / angular_speed : 0.0;
}

std::size_t SimConfig::steps_per_loop() const {
  if (!(angular_speed > 0.0)) return 1;
  return static_cast<std::size_t>(std::llround(2.0 * std::numbers::pi / (angular_speed * step_dt)));
}

void SimConfig::validate() const {
  if (!(step_dt > 0.0)) throw Error("step_dt must be positive");
  if (!(linear_speed >= 0.0) || !(angular_speed >= 0.0)) throw Error("speeds must be non-negative");
  if (!(sense_min >= 0.0) || !(sense_min < sense_max)) throw Error("sense range must satisfy 0 <= min < max");
  if (loops == 0) throw Error("loops must be positive");
  if (monte_carlo_runs == 0) throw Error("monte_carlo_runs must be positive");
  for (const Mat6* m : {&sigma, &omega}) {
    const Eigen::SelfAdjointEigenSolver<Mat6> es(*m, Eigen::EigenvaluesOnly);
    if (!m->isApprox(m->transpose()) || es.eigenvalues().minCoeff() < -1e-12) {
      throw Error("noise covariance must be symmetric PSD");
    }
  }
}

Rot3 random_rotation(Rng& rng) {
  std::normal_distribution<double> n01;
  Eigen::Vector4d q;
  do {
    for (int i = 0; i < 4; ++i) q(i) = n01(rng);
  } while (q.norm() < 1e-9);
  return quaternion_to_rotation(q / q.norm());
}

VecX sample_gaussian(const MatX& cov, Rng& rng) {
  std::normal_distribution<double> n01;
  const Eigen::SelfAdjointEigenSolver<MatX> es(cov);
  VecX unit(cov.rows());
  for (Eigen::Index i = 0; i < unit.size(); ++i) unit(i) = n01(rng);
  const VecX scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * scale.cwiseProduct(unit);
}

namespace {

bool sometimes_visible(const SimConfig& cfg, const Vec3& p, double radius) {
  constexpr int kSamples = 720;
  const Vec3 centre(0.0, radius, 0.0);
  for (int i = 0; i < kSamples; ++i) {
    const double a = 2.0 * std::numbers::pi * i / kSamples;
    // Robot at angle a around the centre, starting from the origin.
    const Vec3 robot = centre + radius * Vec3(std::sin(a), -std::cos(a), 0.0);
    const double d = (p - robot).norm();
    if (d >= cfg.sense_min && d <= cfg.sense_max) return true;
  }
  return false;
}

}  // namespace

World generate_world(const SimConfig& cfg, Rng& rng) {
  const double radius = cfg.circle_radius() > 0.0 ? cfg.circle_radius() : 1.0;
  const Vec3 centre(0.0, radius, 0.0);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  std::uniform_real_distribution<double> ring(std::max(radius - 0.5, 0.1), radius + 0.8);
  std::uniform_real_distribution<double> height(-0.5, 0.5);

  World w;
  const std::size_t K = cfg.num_features;
  for (std::size_t j = 0; j < K; ++j) {
    const double slot = 2.0 * std::numbers::pi / static_cast<double>(K);
    Vec3 p;
    int attempts = 0;
    do {
      if (++attempts > 1000) throw Error("cannot place a feature inside the sensing range");
      const double a = slot * (static_cast<double>(j) + jitter(rng));
      const double r = ring(rng);
      p = centre + Vec3(r * std::cos(a), r * std::sin(a), height(rng));
    } while (!sometimes_visible(cfg, p, radius));
    w.ids.push_back("obj" + std::to_string(j));
    w.pos.push_back(p);
    w.rots.push_back(random_rotation(rng));
  }
  return w;
}

World default_world(const SimConfig& cfg) {
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  return generate_world(cfg, rng);
}

Odometry step_odometry(const SimConfig& cfg) {
  Odometry u;
  u.rot = so3_exp(Vec3(0.0, 0.0, cfg.angular_speed * cfg.step_dt));
  u.pos = Vec3(cfg.linear_speed * cfg.step_dt, 0.0, 0.0);
  u.noise_cov = cfg.sigma;
  return u;
}

Odometry sample_noisy_odometry(const Odometry& u, const Mat6& sigma, Rng& rng, Vec6* drawn) {
  const Vec6 w = sample_gaussian(sigma, rng);
  if (drawn) *drawn = w;
  Odometry out = u;
  out.rot = so3_exp(w.head<3>()) * u.rot;
  out.pos = u.pos + w.tail<3>();
  out.noise_cov = sigma;
  return out;
}

std::vector<PoseObservation> sample_observations(const GroupState& truth, const SimConfig& cfg,
                                                 Rng& rng) {
  std::vector<PoseObservation> obs;
  const Mat3 Rt = truth.robot_rot.transpose();
  for (std::size_t j = 0; j < truth.num_features(); ++j) {
    const Vec3 rel = truth.feature_pos[j] - truth.robot_pos;
    const double d = rel.norm();
    if (d < cfg.sense_min || d > cfg.sense_max) continue;
    const Vec6 v = sample_gaussian(cfg.omega, rng);
    PoseObservation z;
    z.feature_id = truth.feature_ids[j];
    z.rot = so3_exp(v.head<3>()) * Rt * truth.feature_rots[j];
    z.pos = Rt * rel + v.tail<3>();
    z.noise_cov = cfg.omega;
    obs.push_back(std::move(z));
  }
  return obs;
}

GroupState initial_truth(const World& world) {
  GroupState s = GroupState::identity();
  s.feature_ids = world.ids;
  s.feature_rots = world.rots;
  s.feature_pos = world.pos;
  return s;
}

Simulation simulate(const SimConfig& cfg, const World& world, std::uint64_t run_seed) {
  cfg.validate();
  Rng rng(run_seed);
  const std::size_t N = cfg.num_steps();
  const Odometry u = step_odometry(cfg);

  Simulation sim;
  sim.truth.states.reserve(N + 1);
  sim.truth.states.push_back(initial_truth(world));
  sim.observations.reserve(N + 1);

  const auto observe = [&](const GroupState& x) {
    auto obs = sample_observations(x, cfg, rng);
    std::vector<FeatureId> ids;
    for (const auto& z : obs) ids.push_back(z.feature_id);
    sim.truth.visible.push_back(std::move(ids));
    sim.observations.push_back(std::move(obs));
  };

  observe(sim.truth.states.back());
  for (std::size_t n = 0; n < N; ++n) {
    Vec6 drawn;
    sim.measured_odometry.push_back(sample_noisy_odometry(u, cfg.sigma, rng, &drawn));
    sim.odometry_noise.push_back(drawn);
    sim.truth.odometry.push_back(u);
    sim.truth.states.push_back(propagate_mean(sim.truth.states.back(), u));
    observe(sim.truth.states.back());
  }
  return sim;
}

}  // namespace objslam
