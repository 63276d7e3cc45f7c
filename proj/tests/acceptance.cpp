// Prints one PASS/FAIL line per acceptance criterion; exits nonzero on any failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "objslam/experiment.hpp"
#include "objslam/lie.hpp"
#include "objslam/observability.hpp"
#include "objslam/riekf.hpp"
#include "objslam/stdekf.hpp"
#include "oracles.hpp"

using namespace objslam;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

FilterConfig filter(FilterKind k, bool robust = false) {
  FilterConfig c;
  c.kind = k;
  c.robust = robust;
  return c;
}

constexpr std::array<Block, 4> kComponents = {Block::RobotRot, Block::RobotPos, Block::FeatureRot,
                                              Block::FeaturePos};

ExperimentResult table_experiment() {
  ExperimentConfig cfg;
  cfg.sim.monte_carlo_runs = 50;
  cfg.filters = {filter(FilterKind::RiEkf), filter(FilterKind::StdEkf), filter(FilterKind::Ideal)};
  return run_monte_carlo(cfg);
}

Outcome consistency(const ExperimentResult& res) {
  const auto& ri = res.find("riekf");
  const auto& st = res.find("stdekf");
  Outcome o{ri.diverged == 0, ""};
  for (Block b : kAllBlocks) {
    const double v = ri.final_nees(b);
    o.pass = o.pass && v >= 0.8 && v <= 1.4;
    o.detail += std::string(block_name(b)) + fmt("=%.3f ", v);
  }
  const double std_rot = st.final_nees(Block::FeatureRot);
  o.pass = o.pass && std_rot > 2.0;
  o.detail += fmt("| stdekf feature_rotation=%.3f", std_rot);
  return o;
}

Outcome accuracy(const ExperimentResult& res) {
  const auto& ideal = res.find("ideal");
  const auto& ri = res.find("riekf");
  const auto& st = res.find("stdekf");
  int violations = 0;
  Outcome o;
  for (Block b : kComponents) {
    const double a = ideal.final_rmse(b), r = ri.final_rmse(b), s = st.final_rmse(b);
    if (!(a <= r && r <= s)) ++violations;
    o.detail += std::string(block_name(b)) + fmt(" %.4f", a) + fmt("/%.4f", r) + fmt("/%.4f ", s);
  }
  o.pass = violations <= 1;
  o.detail += "| violations=" + std::to_string(violations);
  return o;
}

Outcome invariant_observability() {
  Outcome o{true, ""};
  for (std::size_t K : {1u, 3u}) {
    const JacobianLog log = collect_jacobians(FilterKind::RiEkf, K, 40, 100 + K);
    const MatX O = build_observability_matrix(log);
    const std::size_t dim = null_space(O).dim();
    const double r = (O * oracle::invariant_gauge(K)).norm() / O.norm();
    o.pass = o.pass && log.steps.size() >= 10 && dim == 6 && r < 1e-8;
    o.detail += "K=" + std::to_string(K) + " null=" + std::to_string(dim) + fmt(" residual=%.2e ", r);
  }
  return o;
}

Outcome standard_observability() {
  Outcome o{true, ""};
  for (std::size_t K : {1u, 3u}) {
    const JacobianLog ideal = collect_jacobians(FilterKind::Ideal, K, 40, 200 + K);
    const SubspaceBasis N = null_space(build_observability_matrix(ideal));
    const double c = containment_residual(
        N, oracle::standard_gauge(K, &ideal.robot_anchor, &ideal.feature_anchors));
    const JacobianLog est = collect_jacobians(FilterKind::StdEkf, K, 40, 300 + K);
    const std::size_t est_dim = null_space(build_observability_matrix(est)).dim();
    o.pass = o.pass && N.dim() == 6 && c <= 1e-8 && est_dim == 3;
    o.detail += "K=" + std::to_string(K) + " ideal null=" + std::to_string(N.dim()) +
                fmt(" containment=%.2e", c) + " estimated null=" + std::to_string(est_dim) + " ";
  }
  return o;
}

Odometry random_odometry(std::mt19937_64& rng) {
  Odometry u;
  u.rot = oracle::rot_exp(oracle::random_vec(rng, 0.3));
  u.pos = oracle::random_vec(rng, 0.5);
  u.noise_cov = Mat6::Identity() * 0.01;
  return u;
}

Outcome jacobians() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t K = 1 + static_cast<std::size_t>(i % 3);
    const GroupState x = oracle::random_state(rng, K);
    const Odometry u = random_odometry(rng);
    const std::size_t j = static_cast<std::size_t>(i) % K;
    PoseObservation z;
    z.feature_id = "new";
    z.rot = oracle::random_rotation(rng);
    z.pos = oracle::random_vec(rng, 1.5);
    const auto n = static_cast<Eigen::Index>(x.dim());
    const oracle::Vec6 zero6 = oracle::Vec6::Zero();
    const VecX zero = VecX::Zero(n);
    for (bool inv : {true, false}) {
      MatX F, G, A, B;
      if (inv) {
        const auto p = riekf::propagation_jacobians(x, u);
        const auto a = riekf::augmentation_jacobians(x, z);
        F = p.F, G = p.G, A = a.state, B = a.noise;
      } else {
        const auto p = stdekf::propagation_jacobians(x, u);
        const auto a = stdekf::augmentation_jacobians(x, z);
        F = p.F, G = p.G, A = a.state, B = a.noise;
      }
      const MatX H = inv ? riekf::observation_jacobian(x, j) : stdekf::observation_jacobian(x, j);
      const std::pair<MatX, MatX> pairs[] = {
          {F, oracle::central_difference(
                  [&](const VecX& e) { return oracle::propagated_error(inv, x, u.rot, u.pos, e, zero6); }, n)},
          {G, oracle::central_difference(
                  [&](const VecX& w) { return oracle::propagated_error(inv, x, u.rot, u.pos, zero, w); }, 6)},
          {H, oracle::central_difference(
                  [&](const VecX& e) { return VecX(oracle::innovation_of(inv, x, j, e, zero6)); }, n)},
          {A, oracle::central_difference(
                  [&](const VecX& e) { return VecX(oracle::new_feature_error(inv, x, z.rot, z.pos, e, zero6)); }, n)},
          {B, oracle::central_difference(
                  [&](const VecX& v) { return VecX(oracle::new_feature_error(inv, x, z.rot, z.pos, zero, v)); }, 6)},
      };
      for (const auto& [analytic, numeric] : pairs) {
        worst = std::max(worst, oracle::rel_error(analytic, numeric));
      }
    }
  }
  return {worst < 1e-4, "100 states, 10 Jacobians each" + fmt(", worst relative error %.2e", worst)};
}

MatX small_cov(std::mt19937_64& rng, Eigen::Index n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatX A(n, n);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = u(rng);
  MatX P = A * A.transpose() / static_cast<double>(n) + 0.1 * MatX::Identity(n, n);
  const double d = P.diagonal().maxCoeff();
  return P * (1e-4 / d);
}

Outcome augmentation() {
  std::mt19937_64 rng(6);
  FilterState s;
  s.mean = oracle::random_state(rng, 1);
  s.cov = small_cov(rng, 12);
  PoseObservation z;
  z.feature_id = "new";
  z.rot = oracle::random_rotation(rng);
  z.pos = Vec3(0.8, -1.2, 0.4);
  z.noise_cov = Mat6::Identity() * 1e-4;
  Outcome o{true, ""};
  for (bool inv : {true, false}) {
    const MatX P = inv ? riekf::initialize_feature(s, z).cov : stdekf::initialize_feature(s, z).cov;
    const MatX C = oracle::sampled_augmented_covariance(inv, s.mean, s.cov, z.rot, z.pos,
                                                        z.noise_cov, 100000, rng);
    const double r = oracle::rel_error(P, C);
    o.pass = o.pass && r < 0.05;
    o.detail += std::string(inv ? "riekf" : "stdekf") + fmt(" %.4f ", r);
  }
  return o;
}

Outcome lie_suite() {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t K = static_cast<std::size_t>(i % 4);
    const GroupState a = oracle::random_state(rng, K), b = oracle::random_state(rng, K),
                     c = oracle::random_state(rng, K);
    const GroupState e = GroupState::identity(a.feature_ids);
    const auto d = [&](const GroupState& x, const GroupState& y) {
      worst = std::max(worst, oracle::max_diff(x, y));
    };
    d(group_compose(group_compose(a, b), c), group_compose(a, group_compose(b, c)));
    d(group_compose(a, e), a);
    d(group_compose(e, a), a);
    d(group_compose(a, group_inverse(a)), e);
    d(group_compose(a, b), oracle::compose(a, b));
    d(group_inverse(a), oracle::inverse(a));
    const VecX xi = oracle::random_tangent(rng, K);
    const GroupState x = group_exp(xi, a.feature_ids);
    d(x, oracle::exp(xi, a.feature_ids));
    worst = std::max(worst, (group_log(x) - xi).cwiseAbs().maxCoeff());
    d(group_exp(group_log(a), a.feature_ids), a);
  }
  return {worst < 1e-9, "10000 cases" + fmt(", worst deviation %.2e", worst)};
}

Outcome robust_gating() {
  ExperimentConfig clean;
  clean.sim.monte_carlo_runs = 20;
  clean.filters = {filter(FilterKind::RiEkf, true)};
  const ExperimentResult c = run_monte_carlo(clean);
  const double clean_rate = c.filters[0].gating.rejection_rate();

  ExperimentConfig dirty = clean;
  dirty.outlier_rate = 0.05;
  dirty.outlier_sigmas = 10.0;
  dirty.filters = {filter(FilterKind::RiEkf), filter(FilterKind::RiEkf, true)};
  const ExperimentResult r = run_monte_carlo(dirty);
  const auto& plain = r.find("riekf");
  const auto& robust = r.find("robust-riekf");
  const double caught = robust.gating.injected_rejection_rate();

  Outcome o{clean_rate <= 0.05 && caught >= 0.95 && robust.gating.injected > 0, ""};
  o.detail = fmt("clean rejection %.4f", clean_rate) + fmt(", outliers rejected %.4f", caught) + " |";
  for (Block b : kComponents) {
    const double rr = robust.final_rmse(b), pr = plain.final_rmse(b);
    o.pass = o.pass && rr < pr;
    o.detail += " " + std::string(block_name(b)) + fmt(" %.4f", rr) + fmt("<%.4f", pr);
  }
  return o;
}

Outcome zero_noise() {
  SimConfig cfg;
  cfg.sigma = Mat6::Zero();
  cfg.omega = Mat6::Zero();
  const auto records = to_records(simulate(cfg, default_world(cfg), cfg.seed));
  double worst = 0.0;
  bool ok = true;
  for (FilterKind k : {FilterKind::RiEkf, FilterKind::StdEkf, FilterKind::Ideal}) {
    for (bool robust : {false, true}) {
      const ReplayResult res = run_filter(filter(k, robust), records);
      ok = ok && !res.diverged && res.metrics.size() == cfg.num_steps() + 1;
      for (const auto& m : res.metrics) {
        for (const auto& b : m) {
          if (b.sq_count > 0) worst = std::max(worst, b.rmse());
        }
      }
    }
  }
  return {ok && worst < 1e-8, "6 variants, 2001 steps" + fmt(", worst rmse %.2e", worst)};
}

}  // namespace

int main() {
  const ExperimentResult table = table_experiment();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"consistency", [&] { return consistency(table); }},
      {"accuracy-ordering", [&] { return accuracy(table); }},
      {"invariant-observability", invariant_observability},
      {"standard-observability", standard_observability},
      {"jacobian-oracles", jacobians},
      {"augmentation-covariance", augmentation},
      {"lie-properties", lie_suite},
      {"robust-gating", robust_gating},
      {"zero-noise", zero_noise},
  };
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    Outcome o;
    try {
      o = checks[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, checks[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
