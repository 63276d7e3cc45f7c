#include "objslam/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "objslam/errors.hpp"

namespace objslam {

std::vector<MeasurementRecord> to_records(const Simulation& sim, bool with_truth) {
  std::vector<MeasurementRecord> out;
  const auto& states = sim.truth.states;
  for (std::size_t n = 0; n < states.size(); ++n) {
    if (with_truth) {
      out.push_back(make_truth_record(n, "", states[n].robot_rot, states[n].robot_pos));
      if (n == 0) {
        for (std::size_t j = 0; j < states[n].num_features(); ++j) {
          out.push_back(make_truth_record(n, states[n].feature_ids[j], states[n].feature_rots[j],
                                          states[n].feature_pos[j]));
        }
      }
    }
    if (n > 0) out.push_back(make_record(n, sim.measured_odometry[n - 1]));
    for (const auto& z : sim.observations[n]) out.push_back(make_record(n, z));
  }
  return out;
}

std::set<ObservationKey> inject_outliers(std::vector<MeasurementRecord>& records, double rate,
                                         double sigmas, Rng& rng, bool corrupt_first_sightings) {
  std::set<ObservationKey> hit;
  if (!(rate > 0.0)) return hit;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::set<FeatureId> seen;
  for (auto& r : records) {
    if (r.kind != RecordKind::Obs) continue;
    const bool first = seen.insert(r.feature_id).second;
    if (!(uni(rng) < rate)) continue;
    if (first && !corrupt_first_sightings) continue;
    const Mat6 cov = unpack_upper(r.cov);
    Vec6 d;
    for (int k = 0; k < 6; ++k) {
      d(k) = (coin(rng) ? 1.0 : -1.0) * sigmas * std::sqrt(std::max(cov(k, k), 0.0));
    }
    const Rot3 R = so3_exp(d.head<3>()) * quaternion_to_rotation(r.rotation);
    r.rotation = rotation_to_quaternion(R);
    r.position += d.tail<3>();
    hit.emplace(r.step, r.feature_id);
  }
  return hit;
}

void GatingStats::merge(const GatingStats& o) {
  decisions += o.decisions;
  rejected += o.rejected;
  injected += o.injected;
  injected_rejected += o.injected_rejected;
}

double GatingStats::rejection_rate() const {
  return decisions == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(decisions);
}

double GatingStats::injected_rejection_rate() const {
  return injected == 0 ? 0.0
                       : static_cast<double>(injected_rejected) / static_cast<double>(injected);
}

double FilterSummary::final_nees(Block b) const {
  if (per_step.empty()) return std::numeric_limits<double>::quiet_NaN();
  return per_step.back()[static_cast<std::size_t>(b)].nees();
}

double FilterSummary::final_rmse(Block b) const {
  if (per_step.empty()) return std::numeric_limits<double>::quiet_NaN();
  return per_step.back()[static_cast<std::size_t>(b)].rmse();
}

const FilterSummary& ExperimentResult::find(const std::string& label) const {
  for (const auto& f : filters) {
    if (f.config.label() == label) return f;
  }
  throw Error("no filter '" + label + "' in experiment");
}

namespace {

struct RunProducts {
  std::vector<RunOutcome> outcomes;       // one per filter
  std::vector<std::vector<StepMetrics>> metrics;
};

RunProducts run_one(const ExperimentConfig& cfg, const World& world, std::size_t run) {
  const std::uint64_t seed = cfg.sim.seed + run;
  const Simulation sim = simulate(cfg.sim, world, seed);
  auto records = to_records(sim);
  std::set<ObservationKey> injected;
  if (cfg.outlier_rate > 0.0) {
    Rng rng(seed ^ 0xD1B54A32D192ED03ULL);
    injected = inject_outliers(records, cfg.outlier_rate, cfg.outlier_sigmas, rng,
                               cfg.corrupt_first_sightings);
  }

  RunProducts out;
  for (const auto& fc : cfg.filters) {
    ReplayResult r = run_filter(fc, records, cfg.replay);
    RunOutcome o;
    o.run = run;
    o.seed = seed;
    o.diverged = r.diverged;
    o.reason = r.divergence_reason;
    o.final_state = std::move(r.final_state);
    o.final_truth = sim.truth.states.back();
    o.gating.injected = injected.size();
    for (const auto& g : r.gate_log) {
      ++o.gating.decisions;
      if (!g.accepted) ++o.gating.rejected;
      if (!g.accepted && injected.contains({g.step, g.feature_id})) ++o.gating.injected_rejected;
    }
    out.outcomes.push_back(std::move(o));
    out.metrics.push_back(std::move(r.metrics));
  }
  return out;
}

}  // namespace

ExperimentResult run_monte_carlo(const ExperimentConfig& cfg) {
  cfg.sim.validate();
  if (cfg.filters.empty()) throw Error("no filter selected");
  ExperimentResult res;
  res.sim = cfg.sim;
  res.world = default_world(cfg.sim);

  const std::size_t m = cfg.sim.monte_carlo_runs;
  std::vector<RunProducts> products(m);
  std::vector<std::string> failures(m);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < m; i = next++) {
      try {
        products[i] = run_one(cfg, res.world, i);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, m);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!failures[i].empty()) throw Error("run " + std::to_string(i) + ": " + failures[i]);
  }

  // Ordered reduction by run index.
  for (std::size_t f = 0; f < cfg.filters.size(); ++f) {
    FilterSummary s;
    s.config = cfg.filters[f];
    for (std::size_t i = 0; i < m; ++i) {
      auto& o = products[i].outcomes[f];
      s.gating.merge(o.gating);
      if (o.diverged) {
        ++s.diverged;
      } else {
        const auto& steps = products[i].metrics[f];
        if (s.per_step.size() < steps.size()) s.per_step.resize(steps.size());
        for (std::size_t k = 0; k < steps.size(); ++k) {
          for (std::size_t b = 0; b < kAllBlocks.size(); ++b) s.per_step[k][b].merge(steps[k][b]);
        }
      }
      s.runs.push_back(std::move(o));
    }
    res.filters.push_back(std::move(s));
  }
  return res;
}

std::string summary_table(const ExperimentResult& res) {
  std::ostringstream out;
  const auto& sim = res.sim;
  out << "Monte-Carlo runs: " << sim.monte_carlo_runs << ", steps: " << sim.num_steps()
      << ", features: " << sim.num_features << ", seed: " << sim.seed << "\n";
  const auto table = [&](const char* title, auto value) {
    out << "\n" << title << "\n" << std::left << std::setw(18) << "block";
    for (const auto& f : res.filters) out << std::right << std::setw(16) << f.config.label();
    out << "\n";
    for (Block b : kAllBlocks) {
      out << std::left << std::setw(18) << block_name(b);
      for (const auto& f : res.filters) {
        out << std::right << std::setw(16) << std::fixed << std::setprecision(4) << value(f, b);
      }
      out << "\n";
    }
  };
  table("Final-step NEES", [](const FilterSummary& f, Block b) { return f.final_nees(b); });
  table("Final-step RMSE", [](const FilterSummary& f, Block b) { return f.final_rmse(b); });
  out << "\nDiverged runs:";
  for (const auto& f : res.filters) out << " " << f.config.label() << "=" << f.diverged;
  out << "\n";
  for (const auto& f : res.filters) {
    if (!f.config.robust) continue;
    out << "Gating " << f.config.label() << ": " << f.gating.rejected << "/" << f.gating.decisions
        << " rejected";
    if (f.gating.injected > 0) {
      out << ", injected outliers rejected " << f.gating.injected_rejected << "/"
          << f.gating.injected;
    }
    out << "\n";
  }
  return out.str();
}

namespace {

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

void write_experiment(const ExperimentResult& res, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (const auto& f : res.filters) {
    std::ofstream csv(fs::path(dir) / ("metrics_" + f.config.label() + ".csv"));
    if (!csv) throw Error("cannot write metrics into '" + dir + "'");
    csv << "step,block,rmse,nees\n" << std::setprecision(10);
    for (std::size_t k = 0; k < f.per_step.size(); ++k) {
      for (std::size_t b = 0; b < kAllBlocks.size(); ++b) {
        csv << k << ',' << block_name(kAllBlocks[b]) << ',' << f.per_step[k][b].rmse() << ','
            << f.per_step[k][b].nees() << '\n';
      }
    }
  }

  std::ofstream txt(fs::path(dir) / "summary.txt");
  txt << summary_table(res);

  nlohmann::json j;
  j["runs"] = res.sim.monte_carlo_runs;
  j["steps"] = res.sim.num_steps();
  j["features"] = res.sim.num_features;
  j["seed"] = res.sim.seed;
  for (const auto& f : res.filters) {
    nlohmann::json fj;
    fj["label"] = f.config.label();
    fj["diverged"] = f.diverged;
    for (Block b : kAllBlocks) {
      fj["final"][std::string(block_name(b))] = {{"nees", number_or_null(f.final_nees(b))},
                                                 {"rmse", number_or_null(f.final_rmse(b))}};
    }
    if (f.config.robust) {
      fj["gating"] = {{"decisions", f.gating.decisions},
                      {"rejected", f.gating.rejected},
                      {"injected", f.gating.injected},
                      {"injected_rejected", f.gating.injected_rejected}};
    }
    nlohmann::json div = nlohmann::json::array();
    for (const auto& o : f.runs) {
      if (o.diverged) div.push_back({{"run", o.run}, {"reason", o.reason}});
    }
    fj["divergences"] = div;
    j["filters"].push_back(fj);
  }
  std::ofstream js(fs::path(dir) / "summary.json");
  js << j.dump(2) << '\n';
}

void write_trajectory_csv(const ReplayResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "step,qw,qx,qy,qz,x,y,z\n" << std::setprecision(12);
  for (std::size_t k = 0; k < res.trajectory.size(); ++k) {
    const auto& s = res.trajectory[k];
    const auto q = rotation_to_quaternion(s.robot_rot);
    out << res.first_step + k << ',' << q(0) << ',' << q(1) << ',' << q(2) << ',' << q(3) << ','
        << s.robot_pos.x() << ',' << s.robot_pos.y() << ',' << s.robot_pos.z() << '\n';
  }
}

void write_features_csv(const ReplayResult& res, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "feature_id,qw,qx,qy,qz,x,y,z\n" << std::setprecision(12);
  const auto& s = res.final_state.mean;
  for (std::size_t j = 0; j < s.num_features(); ++j) {
    const auto q = rotation_to_quaternion(s.feature_rots[j]);
    out << s.feature_ids[j] << ',' << q(0) << ',' << q(1) << ',' << q(2) << ',' << q(3) << ','
        << s.feature_pos[j].x() << ',' << s.feature_pos[j].y() << ',' << s.feature_pos[j].z()
        << '\n';
  }
}

World observability_world(const SimConfig& cfg, std::size_t num_features, Rng& rng) {
  const Vec3 centre(0.0, cfg.circle_radius(), 0.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> height(-0.3, 0.3);
  World w;
  for (std::size_t j = 0; j < num_features; ++j) {
    const double a = angle(rng);
    w.ids.push_back("obj" + std::to_string(j));
    w.pos.push_back(centre + Vec3(0.3 * std::cos(a), 0.3 * std::sin(a), height(rng)));
    w.rots.push_back(random_rotation(rng));
  }
  return w;
}

JacobianLog collect_jacobians(FilterKind kind, std::size_t num_features, std::size_t steps,
                              std::uint64_t seed) {
  SimConfig sim;
  sim.num_features = num_features;
  sim.seed = seed;
  sim.loops = steps / sim.steps_per_loop() + 1;
  Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
  const World world = observability_world(sim, num_features, rng);
  const Simulation trace = simulate(sim, world, seed);
  auto records = to_records(trace);
  std::erase_if(records, [&](const MeasurementRecord& r) { return r.step > steps; });

  FilterConfig fc;
  fc.kind = kind;
  fc.record_jacobians = true;
  ReplayOptions opts;
  opts.metrics = false;
  const ReplayResult res = run_filter(fc, records, opts);
  if (res.diverged) throw Error("observability run diverged: " + res.divergence_reason);
  return res.jacobians;
}

}  // namespace objslam
