#include "objslam/runner.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "objslam/errors.hpp"
#include "objslam/gating.hpp"
#include "objslam/riekf.hpp"
#include "objslam/stdekf.hpp"

namespace objslam {

std::string_view filter_name(FilterKind k) {
  switch (k) {
    case FilterKind::RiEkf: return "riekf";
    case FilterKind::StdEkf: return "stdekf";
    case FilterKind::Ideal: return "ideal";
  }
  return "unknown";
}

FilterKind parse_filter(std::string_view s) {
  if (s == "riekf") return FilterKind::RiEkf;
  if (s == "stdekf") return FilterKind::StdEkf;
  if (s == "ideal") return FilterKind::Ideal;
  throw Error("unknown filter '" + std::string(s) + "' (riekf, stdekf, ideal)");
}

std::string FilterConfig::label() const {
  return (robust ? "robust-" : "") + std::string(filter_name(kind));
}

FilterRunner::FilterRunner(FilterConfig cfg, GroupState initial)
    : cfg_(cfg), state_(FilterState::anchored(std::move(initial))) {
  jac_.filter = std::string(filter_name(cfg_.kind));
  jac_.mode = cfg_.kind == FilterKind::Ideal ? JacobianMode::GroundTruth : JacobianMode::Estimated;
  jac_.num_features = state_.mean.num_features();
}

namespace {

const GroupState& require_truth(const GroupState* t, const char* what) {
  if (!t) throw Error(std::string("ideal filter needs ground truth for ") + what);
  return *t;
}

}  // namespace

void FilterRunner::propagate(const Odometry& u, const GroupState* truth_now,
                             const GroupState* truth_next) {
  switch (cfg_.kind) {
    case FilterKind::RiEkf:
      if (cfg_.record_jacobians) record_F(riekf::propagation_jacobians(state_.mean, u).F);
      state_ = riekf::propagate(state_, u);
      break;
    case FilterKind::StdEkf:
      if (cfg_.record_jacobians) record_F(stdekf::propagation_jacobians(state_.mean, u).F);
      state_ = stdekf::propagate(state_, u, state_.mean);
      break;
    case FilterKind::Ideal: {
      const GroupState now = require_truth(truth_now, "propagation").select(state_.mean.feature_ids);
      const GroupState next =
          require_truth(truth_next, "propagation").select(state_.mean.feature_ids);
      if (cfg_.record_jacobians) record_F(stdekf::propagation_jacobians(now, u, &next).F);
      state_ = stdekf::propagate(state_, u, now, &next);
      break;
    }
  }
}

void FilterRunner::observe(std::size_t step, const PoseObservation& z, const GroupState* truth) {
  step_ = step;
  if (state_.mean.index_of(z.feature_id)) {
    update(step, z, truth);
    return;
  }
  switch (cfg_.kind) {
    case FilterKind::RiEkf: state_ = riekf::initialize_feature(state_, z); break;
    case FilterKind::StdEkf: state_ = stdekf::initialize_feature(state_, z); break;
    case FilterKind::Ideal: {
      const GroupState lin =
          require_truth(truth, "initialization").select(state_.mean.feature_ids);
      state_ = stdekf::initialize_feature(state_, z, &lin);
      break;
    }
  }
  if (cfg_.record_jacobians) restart_jacobians(truth);
}

void FilterRunner::update(std::size_t step, const PoseObservation& z, const GroupState* truth) {
  Innovation inn;
  switch (cfg_.kind) {
    case FilterKind::RiEkf: inn = riekf::innovation(state_, z); break;
    case FilterKind::StdEkf: inn = stdekf::innovation(state_, z, state_.mean); break;
    case FilterKind::Ideal: inn = stdekf::innovation(state_, z, require_truth(truth, "update")); break;
  }

  if (cfg_.robust) {
    const GateDecision d = gate(inn, cfg_.gate_sigma);
    gate_log_.push_back({step, z.feature_id, d.accepted, d.margins, d.diagnostic});
    if (!d.accepted) return;
  }

  const UpdateOptions opts{.joseph = cfg_.joseph};
  try {
    state_ = cfg_.kind == FilterKind::RiEkf ? riekf::apply_innovation(state_, inn, opts)
                                            : stdekf::apply_innovation(state_, inn, opts);
  } catch (const IllConditionedInnovation& e) {
    ++skipped_;
    GateLogEntry entry{step, z.feature_id, false, {}, std::string("update skipped: ") + e.what()};
    entry.margins.fill(std::numeric_limits<double>::quiet_NaN());
    if (cfg_.robust) {
      gate_log_.back() = entry;
    } else {
      gate_log_.push_back(std::move(entry));
    }
    return;
  }
  if (cfg_.record_jacobians) record_H(inn.H);
}

void FilterRunner::record_F(const MatX& F) {
  if (pending_open_) {
    pending_.F = F;
    jac_.steps.push_back(std::move(pending_));
    pending_ = {};
    pending_open_ = false;
  } else if (jac_.steps.empty()) {
    jac_.steps.push_back({F, MatX(0, F.cols())});
  } else {
    // No observation since the last move: fold into the previous transition.
    jac_.steps.back().F = F * jac_.steps.back().F;
  }
}

void FilterRunner::record_H(const MatX& H) {
  if (!pending_open_) {
    pending_ = {MatX(), MatX(0, H.cols())};
    pending_open_ = true;
  }
  MatX stacked(pending_.H.rows() + H.rows(), H.cols());
  stacked << pending_.H, H;
  pending_.H = std::move(stacked);
}

void FilterRunner::restart_jacobians(const GroupState* truth) {
  jac_.steps.clear();
  pending_ = {};
  pending_open_ = false;
  jac_.num_features = state_.mean.num_features();
  jac_start_ = step_;
  jac_.feature_anchors.clear();
  jac_.robot_anchor = Vec3::Zero();
  if (truth) {
    jac_.robot_anchor = truth->robot_pos;
    for (const auto& id : state_.mean.feature_ids) {
      const auto j = truth->index_of(id);
      if (!j) {
        jac_.feature_anchors.clear();
        break;
      }
      jac_.feature_anchors.push_back(truth->feature_pos[*j]);
    }
  }
}

JacobianLog FilterRunner::jacobians() const {
  JacobianLog out = jac_;
  if (pending_open_) {
    const auto n = static_cast<Eigen::Index>(out.dim());
    out.steps.push_back({MatX::Identity(n, n), pending_.H});
  }
  return out;
}

Odometry synthesize_constant_velocity_odometry(std::span<const GroupState> history,
                                               const Mat6& noise_cov) {
  Odometry u;
  u.noise_cov = noise_cov;
  if (history.size() < 2) return u;
  Vec3 sum = Vec3::Zero();
  for (std::size_t k = 1; k < history.size(); ++k) {
    sum += history[k - 1].robot_rot.transpose() * (history[k].robot_pos - history[k - 1].robot_pos);
  }
  u.pos = sum / static_cast<double>(history.size() - 1);
  return u;
}

void BlockAccumulator::merge(const BlockAccumulator& o) {
  sq_error += o.sq_error;
  sq_count += o.sq_count;
  nees_sum += o.nees_sum;
  nees_dof += o.nees_dof;
  nees_skipped += o.nees_skipped;
}

double BlockAccumulator::rmse() const {
  return sq_count == 0 ? std::numeric_limits<double>::quiet_NaN()
                       : std::sqrt(sq_error / static_cast<double>(sq_count));
}

double BlockAccumulator::nees() const {
  return nees_dof == 0 ? std::numeric_limits<double>::quiet_NaN()
                       : nees_sum / static_cast<double>(nees_dof);
}

StepMetrics evaluate_step(FilterKind kind, const GroupState& truth, const FilterState& est) {
  const VecX std_e = standard_error(truth, est.mean);
  const VecX nees_e = kind == FilterKind::RiEkf ? invariant_error(truth, est.mean) : std_e;
  const TangentLayout L{est.mean.num_features()};

  StepMetrics m;
  const auto add = [&](BlockAccumulator& acc, Block b, std::size_t j) {
    const auto idx = block_indices(b, L, j);
    acc.sq_error += std_e(idx).squaredNorm();
    acc.sq_count += 1;
    const VecX e = nees_e(idx);
    const MatX P = est.cov(idx, idx);
    const Eigen::LLT<MatX> llt(P);
    if (llt.info() != Eigen::Success) {
      ++acc.nees_skipped;
      return;
    }
    acc.nees_sum += e.dot(llt.solve(e));
    acc.nees_dof += static_cast<std::size_t>(e.size());
  };
  for (std::size_t b = 0; b < kAllBlocks.size(); ++b) {
    const Block blk = kAllBlocks[b];
    if (!is_feature_block(blk)) {
      add(m[b], blk, 0);
      continue;
    }
    for (std::size_t j = 0; j < L.num_features; ++j) add(m[b], blk, j);
  }
  return m;
}

namespace {

struct TruthTracker {
  GroupState state;
  bool have_robot = false;

  void apply(const MeasurementRecord& r) {
    const Rot3 R = quaternion_to_rotation(r.rotation);
    if (r.feature_id.empty()) {
      state.robot_rot = R;
      state.robot_pos = r.position;
      have_robot = true;
      return;
    }
    if (const auto j = state.index_of(r.feature_id)) {
      state.feature_rots[*j] = R;
      state.feature_pos[*j] = r.position;
    } else {
      state.feature_ids.push_back(r.feature_id);
      state.feature_rots.push_back(R);
      state.feature_pos.push_back(r.position);
    }
  }

  bool covers(const GroupState& est) const {
    if (!have_robot) return false;
    for (const auto& id : est.feature_ids) {
      if (!state.index_of(id)) return false;
    }
    return true;
  }
};

std::string check_health(const FilterState& s, bool final_step) {
  if (!s.mean.robot_rot.allFinite() || !s.mean.robot_pos.allFinite()) return "non-finite mean";
  for (std::size_t j = 0; j < s.mean.num_features(); ++j) {
    if (!s.mean.feature_rots[j].allFinite() || !s.mean.feature_pos[j].allFinite()) {
      return "non-finite mean";
    }
  }
  if (!s.cov.allFinite()) return "non-finite covariance";
  if (s.cov.diagonal().minCoeff() < -1e-9) return "negative covariance diagonal";
  if (final_step && s.cov.size() > 0) {
    const Eigen::SelfAdjointEigenSolver<MatX> es(s.cov, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, s.cov.cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-9 * scale) return "covariance not positive semidefinite";
  }
  return {};
}

}  // namespace

ReplayResult run_filter(const FilterConfig& cfg, std::span<const MeasurementRecord> records,
                        const ReplayOptions& opts) {
  ReplayResult res;
  res.config = cfg;
  FilterRunner runner(cfg);
  res.final_state = runner.state();
  if (records.empty()) return res;
  if (cfg.kind == FilterKind::Ideal &&
      std::none_of(records.begin(), records.end(),
                   [](const auto& r) { return r.kind == RecordKind::Truth; })) {
    throw Error("the ideal filter needs ground-truth records");
  }

  // Records are sorted by step; process each step as a group.
  std::map<std::size_t, std::vector<const MeasurementRecord*>> by_step;
  for (const auto& r : records) by_step[r.step].push_back(&r);
  res.first_step = by_step.begin()->first;
  res.last_step = by_step.rbegin()->first;

  TruthTracker truth;
  std::vector<GroupState> history;  // robot poses only, for constant velocity

  try {
    for (std::size_t step = res.first_step; step <= res.last_step; ++step) {
      const auto it = by_step.find(step);
      static const std::vector<const MeasurementRecord*> kNone;
      const auto& group = it == by_step.end() ? kNone : it->second;

      const GroupState truth_prev = truth.state;
      const bool had_truth = truth.have_robot;
      for (const auto* r : group) {
        if (r->kind == RecordKind::Truth) truth.apply(*r);
      }
      const GroupState* t_now = truth.have_robot ? &truth.state : nullptr;
      const GroupState* t_prev = had_truth ? &truth_prev : nullptr;

      if (step > res.first_step) {
        bool moved = false;
        for (const auto* r : group) {
          if (r->kind != RecordKind::Odom) continue;
          runner.propagate(to_odometry(*r), t_prev, t_now);
          moved = true;
        }
        if (!moved && opts.constant_velocity) {
          runner.propagate(synthesize_constant_velocity_odometry(history, opts.cv_noise), t_prev,
                           t_now);
        }
      }
      for (const auto* r : group) {
        if (r->kind == RecordKind::Obs) runner.observe(step, to_observation(*r), t_now);
      }

      const FilterState& s = runner.state();
      if (opts.constant_velocity) {
        GroupState pose;
        pose.robot_rot = s.mean.robot_rot;
        pose.robot_pos = s.mean.robot_pos;
        history.push_back(std::move(pose));
      }
      if (opts.keep_trajectory) res.trajectory.push_back(s.mean);

      std::string reason = check_health(s, step == res.last_step);
      if (reason.empty() && truth.covers(s.mean)) {
        if (standard_error(truth.state, s.mean).norm() > opts.divergence_error) {
          reason = "estimation error above divergence threshold";
        } else if (opts.metrics) {
          res.metrics.push_back(evaluate_step(cfg.kind, truth.state, s));
        }
      } else if (reason.empty() && opts.metrics) {
        res.metrics.emplace_back();
      }
      if (!reason.empty()) {
        res.diverged = true;
        res.divergence_reason = "step " + std::to_string(step) + ": " + reason;
        break;
      }
    }
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    res.diverged = true;
    res.divergence_reason = e.what();
  }

  res.final_state = runner.state();
  if (truth.covers(res.final_state.mean)) res.final_truth = truth.state;
  res.gate_log = runner.gate_log();
  res.skipped_updates = runner.skipped_updates();
  if (cfg.record_jacobians) res.jacobians = runner.jacobians();
  return res;
}

}  // namespace objslam
