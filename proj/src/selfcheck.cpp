#include "objslam/selfcheck.hpp"

#include <algorithm>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "objslam/riekf.hpp"
#include "objslam/simulator.hpp"
#include "objslam/stdekf.hpp"

namespace objslam {

std::string JacobianCheckReport::format() const {
  std::ostringstream out;
  out << "Jacobian check over " << trials << " random states (tolerance " << tolerance << ")\n";
  for (const auto& e : entries) {
    out << "  " << std::left << std::setw(20) << e.name << std::scientific << std::setprecision(3)
        << e.max_error << (e.max_error < tolerance ? "  ok" : "  FAIL") << "\n";
  }
  out << (passed ? "PASS" : "FAIL") << "\n";
  return out.str();
}

namespace {

constexpr double kStep = 1e-6;

using Map = std::function<VecX(const VecX&)>;

MatX numeric_jacobian(const Map& f, Eigen::Index n) {
  const VecX f0 = f(VecX::Zero(n));
  MatX J(f0.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    VecX d = VecX::Zero(n);
    d(i) = kStep;
    J.col(i) = (f(d) - f(-d)) / (2.0 * kStep);
  }
  return J;
}

double relative_error(const MatX& analytic, const MatX& numeric) {
  return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
}

Vec3 gaussian3(Rng& rng, double s) {
  std::normal_distribution<double> n(0.0, s);
  return {n(rng), n(rng), n(rng)};
}

GroupState random_state(Rng& rng) {
  std::uniform_int_distribution<int> count(1, 3);
  const int K = count(rng);
  GroupState x;
  x.robot_rot = random_rotation(rng);
  x.robot_pos = gaussian3(rng, 2.0);
  for (int j = 0; j < K; ++j) {
    x.feature_ids.push_back("f" + std::to_string(j));
    x.feature_rots.push_back(random_rotation(rng));
    x.feature_pos.push_back(gaussian3(rng, 2.0));
  }
  return x;
}

Odometry with_noise(const Odometry& u, const Vec6& w) {
  Odometry out = u;
  out.rot = so3_exp(w.head<3>()) * u.rot;
  out.pos = u.pos + w.tail<3>();
  return out;
}

// True state from an error vector, per filter convention.
GroupState perturb(bool invariant, const GroupState& est, const VecX& e) {
  return invariant ? group_compose(group_exp(e, est.feature_ids), est) : stdekf::retract(est, e);
}

VecX error_of(bool invariant, const GroupState& truth, const GroupState& est) {
  if (invariant) return group_log(group_between(truth, est));
  const TangentLayout L{est.num_features()};
  VecX e(L.dim());
  e.segment<3>(L.robot_rot()) = so3_log(truth.robot_rot * est.robot_rot.transpose());
  e.segment<3>(L.robot_pos()) = truth.robot_pos - est.robot_pos;
  for (std::size_t j = 0; j < L.num_features; ++j) {
    e.segment<3>(L.feature_rot(j)) = so3_log(truth.feature_rots[j] * est.feature_rots[j].transpose());
    e.segment<3>(L.feature_pos(j)) = truth.feature_pos[j] - est.feature_pos[j];
  }
  return e;
}

struct Analytic {
  MatX F, G, H, aug_state, aug_noise;
};

Analytic analytic(bool invariant, const GroupState& x, const Odometry& u, std::size_t j,
                  const PoseObservation& z_new) {
  Analytic a;
  if (invariant) {
    const auto pj = riekf::propagation_jacobians(x, u);
    const auto aj = riekf::augmentation_jacobians(x, z_new);
    a = {pj.F, pj.G, riekf::observation_jacobian(x, j), aj.state, aj.noise};
  } else {
    const auto pj = stdekf::propagation_jacobians(x, u);
    const auto aj = stdekf::augmentation_jacobians(x, z_new);
    a = {pj.F, pj.G, stdekf::observation_jacobian(x, j), aj.state, aj.noise};
  }
  return a;
}

Analytic numeric(bool invariant, const GroupState& x, const Odometry& u, std::size_t j,
                 const PoseObservation& z_new) {
  const auto n = static_cast<Eigen::Index>(x.dim());
  const GroupState x_next = propagate_mean(x, u);
  Analytic a;
  a.F = numeric_jacobian(
      [&](const VecX& e) {
        return error_of(invariant, propagate_mean(perturb(invariant, x, e), u), x_next);
      },
      n);
  a.G = numeric_jacobian(
      [&](const VecX& w) {
        return error_of(invariant, propagate_mean(x, with_noise(u, w)), x_next);
      },
      6);
  a.H = numeric_jacobian(
      [&](const VecX& e) {
        const auto [Rz, pz] = predict_observation(perturb(invariant, x, e), j);
        PoseObservation z{x.feature_ids[j], Rz, pz, Mat6::Identity()};
        return VecX(observation_residual(x, j, z));
      },
      n);

  const GroupState x_aug = augment_mean(x, z_new);
  const TangentLayout La{x_aug.num_features()};
  const std::size_t k = x.num_features();
  const auto new_feature = [&](const GroupState& truth_x, const Vec6& v) {
    PoseObservation z = z_new;  // measurement fixed, noise moves the truth
    z.rot = so3_exp(-v.head<3>()) * z_new.rot;
    z.pos = z_new.pos - v.tail<3>();
    const VecX e = error_of(invariant, augment_mean(truth_x, z), x_aug);
    VecX out(6);
    out << e.segment<3>(La.feature_rot(k)), e.segment<3>(La.feature_pos(k));
    return out;
  };
  a.aug_state = numeric_jacobian(
      [&](const VecX& e) { return new_feature(perturb(invariant, x, e), Vec6::Zero()); }, n);
  a.aug_noise = numeric_jacobian([&](const VecX& v) { return new_feature(x, Vec6(v)); }, 6);
  return a;
}

}  // namespace

JacobianCheckReport check_jacobians(std::uint64_t seed, std::size_t trials, bool negative_control,
                                    double tolerance) {
  Rng rng(seed);
  std::map<std::string, double> worst;
  const char* names[] = {"F", "G", "H", "aug_state", "aug_noise"};
  for (const char* filter : {"riekf", "stdekf"}) {
    for (const char* n : names) worst[std::string(filter) + "." + n] = 0.0;
  }

  for (std::size_t t = 0; t < trials; ++t) {
    const GroupState x = random_state(rng);
    Odometry u;
    u.rot = so3_exp(gaussian3(rng, 0.5));
    u.pos = gaussian3(rng, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, x.num_features() - 1);
    const std::size_t j = pick(rng);
    PoseObservation z_new;
    z_new.feature_id = "new";
    z_new.rot = random_rotation(rng);
    z_new.pos = gaussian3(rng, 1.5);

    for (const bool invariant : {true, false}) {
      Analytic A = analytic(invariant, x, u, j, z_new);
      if (negative_control && invariant) {
        const TangentLayout L{x.num_features()};
        A.H.block<3, 3>(3, L.feature_pos(j)) *= -1.0;
      }
      const Analytic N = numeric(invariant, x, u, j, z_new);
      const std::string prefix = invariant ? "riekf." : "stdekf.";
      const std::pair<const MatX*, const MatX*> pairs[] = {
          {&A.F, &N.F}, {&A.G, &N.G}, {&A.H, &N.H}, {&A.aug_state, &N.aug_state},
          {&A.aug_noise, &N.aug_noise}};
      for (std::size_t b = 0; b < 5; ++b) {
        double& w = worst[prefix + names[b]];
        w = std::max(w, relative_error(*pairs[b].first, *pairs[b].second));
      }
    }
  }

  JacobianCheckReport rep;
  rep.trials = trials;
  rep.tolerance = tolerance;
  rep.passed = true;
  for (const char* filter : {"riekf", "stdekf"}) {
    for (const char* n : names) {
      const std::string key = std::string(filter) + "." + n;
      rep.entries.push_back({key, worst[key]});
      if (!(worst[key] < tolerance)) rep.passed = false;
    }
  }
  return rep;
}

}  // namespace objslam
