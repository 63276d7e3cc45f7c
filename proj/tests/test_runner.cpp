#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "objslam/errors.hpp"
#include "objslam/experiment.hpp"
#include "objslam/runner.hpp"
#include "oracles.hpp"

using namespace objslam;

namespace {

SimConfig small_config(double noise = 0.1) {
  SimConfig cfg;
  cfg.loops = 2;
  cfg.sigma = Mat6::Identity() * noise * noise;
  cfg.omega = Mat6::Identity() * noise * noise;
  return cfg;
}

std::vector<MeasurementRecord> trace(const SimConfig& cfg, std::uint64_t seed) {
  return to_records(simulate(cfg, default_world(cfg), seed));
}

FilterConfig config(FilterKind kind, bool robust = false) {
  FilterConfig c;
  c.kind = kind;
  c.robust = robust;
  return c;
}

}  // namespace

TEST(FilterKinds, NamesAndLabels) {
  EXPECT_EQ(parse_filter("stdekf"), FilterKind::StdEkf);
  EXPECT_EQ(filter_name(FilterKind::Ideal), "ideal");
  EXPECT_THROW(parse_filter("ukf"), Error);
  EXPECT_EQ(config(FilterKind::RiEkf, true).label(), "robust-riekf");
  EXPECT_EQ(config(FilterKind::StdEkf).label(), "stdekf");
}

TEST(ConstantVelocity, NoHistoryMeansNoMotion) {
  const Mat6 noise = Mat6::Identity() * 1e-3;
  const Odometry u = synthesize_constant_velocity_odometry({}, noise);
  EXPECT_EQ(u.rot, Mat3::Identity());
  EXPECT_EQ(u.pos, Vec3::Zero());
  EXPECT_EQ(u.noise_cov, noise);
  const std::vector<GroupState> one{GroupState::identity()};
  EXPECT_EQ(synthesize_constant_velocity_odometry(one, noise).pos, Vec3::Zero());
}

TEST(ConstantVelocity, AveragesBodyFrameTranslations) {
  const Odometry step = step_odometry(SimConfig{});
  std::vector<GroupState> history{GroupState::identity()};
  for (int k = 0; k < 30; ++k) history.push_back(oracle::move(history.back(), step.rot, step.pos));
  const Odometry u = synthesize_constant_velocity_odometry(history, Mat6::Identity());
  EXPECT_EQ(u.rot, Mat3::Identity());
  EXPECT_LT((u.pos - step.pos).norm(), 1e-12);

  // All of the history counts, not a window.
  history.resize(3);
  history.push_back(oracle::move(history.back(), Mat3::Identity(), Vec3(0.4, 0, 0)));
  const Vec3 avg = synthesize_constant_velocity_odometry(history, Mat6::Identity()).pos;
  EXPECT_LT((avg - Vec3((0.1 + 0.1 + 0.4) / 3.0, 0, 0)).norm(), 1e-12);
}

TEST(ConstantVelocity, ReplayWithoutOdometryTracksSpeed) {
  SimConfig cfg = small_config(0.0);
  cfg.loops = 1;
  auto records = trace(cfg, 4);
  std::erase_if(records, [](const MeasurementRecord& r) { return r.kind == RecordKind::Odom; });
  for (auto& r : records) {
    if (r.kind == RecordKind::Obs) r.cov = pack_upper(Mat6::Identity() * 1e-4);
  }
  ReplayOptions opts;
  opts.constant_velocity = true;
  opts.cv_noise = Mat6::Identity() * 1e-2;
  opts.keep_trajectory = true;
  const ReplayResult res = run_filter(config(FilterKind::RiEkf), records, opts);
  ASSERT_FALSE(res.diverged) << res.divergence_reason;
  ASSERT_EQ(res.trajectory.size(), 81u);
  const Odometry u = synthesize_constant_velocity_odometry(res.trajectory, Mat6::Identity());
  EXPECT_NEAR(u.pos.norm(), 0.1, 0.02);
}

TEST(Replay, EmptyLogGivesEmptyResult) {
  const ReplayResult res = run_filter(config(FilterKind::StdEkf), {});
  EXPECT_FALSE(res.diverged);
  EXPECT_TRUE(res.metrics.empty());
  EXPECT_EQ(res.final_state.mean.num_features(), 0u);
}

TEST(Replay, IdealNeedsTruth) {
  SimConfig cfg = small_config();
  const auto records = to_records(simulate(cfg, default_world(cfg), 1), false);
  EXPECT_THROW(run_filter(config(FilterKind::Ideal), records), Error);
  EXPECT_NO_THROW(run_filter(config(FilterKind::RiEkf), records));
}

TEST(Replay, ZeroNoiseIsExactForEveryVariant) {
  const auto records = trace(small_config(0.0), 2);
  for (FilterKind k : {FilterKind::RiEkf, FilterKind::StdEkf, FilterKind::Ideal}) {
    for (bool robust : {false, true}) {
      const ReplayResult res = run_filter(config(k, robust), records);
      ASSERT_FALSE(res.diverged) << res.divergence_reason;
      ASSERT_EQ(res.metrics.size(), 161u);
      for (const auto& m : res.metrics) {
        for (const auto& b : m) {
          if (b.sq_count > 0) EXPECT_LT(b.rmse(), 1e-8);
        }
      }
      EXPECT_EQ(res.final_state.mean.num_features(), 6u);
    }
  }
}

TEST(Replay, SingularInnovationIsSkippedNotFatal) {
  const auto records = trace(small_config(0.0), 3);
  const ReplayResult res = run_filter(config(FilterKind::RiEkf), records);
  EXPECT_FALSE(res.diverged);
  EXPECT_GT(res.skipped_updates, 0u);
  ASSERT_FALSE(res.gate_log.empty());
  EXPECT_NE(res.gate_log.front().diagnostic.find("skipped"), std::string::npos);
}

TEST(Replay, LogRoundTripReproducesRun) {
  const auto records = trace(small_config(), 5);
  std::stringstream io;
  write_measurement_log(io, records);
  const auto back = read_measurement_log(io);
  for (FilterKind k : {FilterKind::RiEkf, FilterKind::Ideal}) {
    const ReplayResult a = run_filter(config(k), records);
    const ReplayResult b = run_filter(config(k), back);
    EXPECT_EQ(a.final_state.cov, b.final_state.cov);
    EXPECT_EQ(a.final_state.mean.robot_pos, b.final_state.mean.robot_pos);
    ASSERT_EQ(a.metrics.size(), b.metrics.size());
    EXPECT_EQ(a.metrics.back()[0].nees_sum, b.metrics.back()[0].nees_sum);
  }
}

TEST(Replay, RobustModeLogsEveryDecision) {
  auto records = trace(small_config(), 6);
  std::size_t updates = 0;
  std::set<FeatureId> seen;
  for (const auto& r : records) {
    if (r.kind == RecordKind::Obs && !seen.insert(r.feature_id).second) ++updates;
  }
  const ReplayResult res = run_filter(config(FilterKind::RiEkf, true), records);
  EXPECT_EQ(res.gate_log.size(), updates);
  std::size_t rejected = 0;
  for (const auto& e : res.gate_log) rejected += e.accepted ? 0 : 1;
  EXPECT_LT(static_cast<double>(rejected) / static_cast<double>(updates), 0.05);
}

TEST(Replay, GrossOutlierIsRejected) {
  auto records = trace(small_config(), 7);
  std::set<FeatureId> seen;
  MeasurementRecord* target = nullptr;
  for (auto& r : records) {
    if (r.kind == RecordKind::Obs && !seen.insert(r.feature_id).second && r.step > 20) {
      target = &r;
      break;
    }
  }
  ASSERT_NE(target, nullptr);
  target->position += Vec3(5.0, 5.0, 5.0);
  const std::size_t step = target->step;
  const FeatureId id = target->feature_id;
  const ReplayResult res = run_filter(config(FilterKind::StdEkf, true), records);
  bool found = false;
  for (const auto& e : res.gate_log) {
    if (e.step == step && e.feature_id == id) {
      found = true;
      EXPECT_FALSE(e.accepted);
    }
  }
  EXPECT_TRUE(found);
}

TEST(Replay, HugeOdometryErrorIsFlaggedAsDivergence) {
  auto records = trace(small_config(), 8);
  for (auto& r : records) {
    if (r.kind == RecordKind::Odom && r.step == 10) r.position = Vec3(5000, 0, 0);
  }
  const ReplayResult res = run_filter(config(FilterKind::RiEkf), records);
  EXPECT_TRUE(res.diverged);
  EXPECT_NE(res.divergence_reason.find("step 10"), std::string::npos);
}

TEST(Replay, InvariantJacobianLogHasIdentityTransitions) {
  FilterConfig c = config(FilterKind::RiEkf);
  c.record_jacobians = true;
  const ReplayResult res = run_filter(c, trace(small_config(), 9));
  const JacobianLog& log = res.jacobians;
  EXPECT_EQ(log.num_features, res.final_state.mean.num_features());
  ASSERT_FALSE(log.steps.empty());
  const auto n = static_cast<Eigen::Index>(log.dim());
  for (const auto& s : log.steps) {
    EXPECT_EQ(s.F, MatX::Identity(n, n));
    EXPECT_EQ(s.H.cols(), n);
  }
}

TEST(EvaluateStep, TruthGivesZeroErrors) {
  std::mt19937_64 rng(10);
  FilterState s;
  s.mean = oracle::random_state(rng, 2);
  s.cov = MatX::Identity(18, 18);
  const StepMetrics m = evaluate_step(FilterKind::RiEkf, s.mean, s);
  for (const auto& b : m) {
    EXPECT_LT(b.nees(), 1e-20);
    EXPECT_LT(b.rmse(), 1e-15);
  }
  EXPECT_EQ(m[static_cast<std::size_t>(Block::FeaturePose)].sq_count, 2u);
  EXPECT_EQ(m[static_cast<std::size_t>(Block::FeaturePose)].nees_dof, 12u);
}

TEST(EvaluateStep, SingularBlocksAreSkipped) {
  FilterState s = FilterState::anchored(GroupState::identity({"a"}));
  const StepMetrics m = evaluate_step(FilterKind::StdEkf, s.mean, s);
  EXPECT_EQ(m[0].nees_skipped, 1u);
  EXPECT_TRUE(std::isnan(m[0].nees()));
  EXPECT_EQ(m[0].rmse(), 0.0);
}
