#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "json.hpp"

#include "objslam/errors.hpp"
#include "objslam/experiment.hpp"
#include "objslam/io.hpp"
#include "objslam/observability.hpp"
#include "objslam/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace objslam;

namespace {

Mat6 diagonal_cov(double rot_sigma, double pos_sigma) {
  Mat6 m = Mat6::Zero();
  m.diagonal() << Vec3::Constant(rot_sigma * rot_sigma), Vec3::Constant(pos_sigma * pos_sigma);
  return m;
}

std::string format_report(const ObservabilityReport& r) {
  std::ostringstream out;
  out << "check:          " << r.check << "\n"
      << "filter:         " << r.filter << " (" << r.mode << " Jacobians)\n"
      << "matrix:         " << r.rows << " x " << r.cols << " over " << r.steps << " steps\n"
      << "rank tolerance: " << r.tolerance << "\n"
      << "null dimension: " << r.null_dim << " (expected " << r.expected_dim << ")\n"
      << std::scientific << std::setprecision(3)
      << "basis residual: " << r.residual << "\n"
      << "containment:    " << r.containment << "\n";
  for (const auto& n : r.notes) out << "note:           " << n << "\n";
  out << (r.passed ? "PASS" : "FAIL") << "\n";
  return out.str();
}

struct SimFlags {
  std::size_t runs = 50;
  std::size_t loops = 25;
  std::size_t features = 6;
  std::uint64_t seed = 1;
  double sigma_rot = 0.1, sigma_pos = 0.1;
  double omega_rot = 0.1, omega_pos = 0.1;

  SimConfig config() const {
    SimConfig c;
    c.monte_carlo_runs = runs;
    c.loops = loops;
    c.num_features = features;
    c.seed = seed;
    c.sigma = diagonal_cov(sigma_rot, sigma_pos);
    c.omega = diagonal_cov(omega_rot, omega_pos);
    return c;
  }
};

int cmd_simulate(const SimFlags& sf, const std::vector<std::string>& filters, bool robust,
                 bool both, double outliers, bool corrupt_first, std::size_t threads, const std::string& out_dir,
                 const std::string& export_log, const std::string& jacobian_log) {
  ExperimentConfig cfg;
  cfg.sim = sf.config();
  cfg.outlier_rate = outliers;
  cfg.corrupt_first_sightings = corrupt_first;
  cfg.threads = threads;
  for (const auto& name : filters) {
    FilterConfig fc;
    fc.kind = parse_filter(name);
    if (!robust || both) cfg.filters.push_back(fc);
    if (robust || both) {
      fc.robust = true;
      cfg.filters.push_back(fc);
    }
  }

  const ExperimentResult res = run_monte_carlo(cfg);
  write_experiment(res, out_dir);
  std::cout << summary_table(res);

  if (!export_log.empty() || !jacobian_log.empty()) {
    // Run 0 exactly as the Monte-Carlo driver saw it.
    auto records = to_records(simulate(cfg.sim, res.world, cfg.sim.seed));
    if (cfg.outlier_rate > 0.0) {
      Rng rng(cfg.sim.seed ^ 0xD1B54A32D192ED03ULL);
      inject_outliers(records, cfg.outlier_rate, cfg.outlier_sigmas, rng,
                      cfg.corrupt_first_sightings);
    }
    if (!export_log.empty()) write_measurement_log(export_log, records);
    if (!jacobian_log.empty()) {
      FilterConfig fc = cfg.filters.front();
      fc.record_jacobians = true;
      write_jacobian_log(jacobian_log, run_filter(fc, records, cfg.replay).jacobians);
    }
  }
  return 0;
}

int cmd_replay(const std::string& input, const std::string& filter, bool robust, bool cv,
               const std::vector<double>& cv_sigma, const std::string& out_dir) {
  if (cv && cv_sigma.size() != 2) {
    throw Error("--cv-odometry needs --cv-sigma ROT POS");
  }
  const auto records = read_measurement_log(input);
  FilterConfig fc;
  fc.kind = parse_filter(filter);
  fc.robust = robust;
  ReplayOptions opts;
  opts.constant_velocity = cv;
  if (cv) opts.cv_noise = diagonal_cov(cv_sigma[0], cv_sigma[1]);
  opts.keep_trajectory = true;
  const ReplayResult res = run_filter(fc, records, opts);

  fs::create_directories(out_dir);
  write_trajectory_csv(res, (fs::path(out_dir) / "trajectory.csv").string());
  write_features_csv(res, (fs::path(out_dir) / "features.csv").string());
  if (robust) {
    std::ofstream g(fs::path(out_dir) / "gating.csv");
    g << "step,feature_id,accepted,m0,m1,m2,m3,m4,m5,diagnostic\n" << std::setprecision(6);
    for (const auto& e : res.gate_log) {
      g << e.step << ',' << e.feature_id << ',' << (e.accepted ? 1 : 0);
      for (double m : e.margins) g << ',' << m;
      g << ',' << e.diagnostic << '\n';
    }
  }

  nlohmann::json j;
  j["filter"] = fc.label();
  j["records"] = records.size();
  j["steps"] = records.empty() ? 0 : res.last_step - res.first_step + 1;
  j["features"] = res.final_state.mean.num_features();
  j["diverged"] = res.diverged;
  if (res.diverged) j["divergence_reason"] = res.divergence_reason;
  j["skipped_updates"] = res.skipped_updates;
  if (robust) {
    std::size_t rejected = 0;
    for (const auto& e : res.gate_log) rejected += e.accepted ? 0 : 1;
    j["gating"] = {{"decisions", res.gate_log.size()}, {"rejected", rejected}};
  }
  if (!res.metrics.empty() && res.final_truth) {
    std::ofstream csv(fs::path(out_dir) / "metrics.csv");
    csv << "step,block,rmse,nees\n" << std::setprecision(10);
    for (std::size_t k = 0; k < res.metrics.size(); ++k) {
      for (std::size_t b = 0; b < kAllBlocks.size(); ++b) {
        csv << res.first_step + k << ',' << block_name(kAllBlocks[b]) << ','
            << res.metrics[k][b].rmse() << ',' << res.metrics[k][b].nees() << '\n';
      }
    }
    for (std::size_t b = 0; b < kAllBlocks.size(); ++b) {
      const double v = res.metrics.back()[b].rmse();
      j["final_rmse"][std::string(block_name(kAllBlocks[b]))] =
          std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    }
  }
  std::ofstream(fs::path(out_dir) / "summary.json") << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return res.diverged ? 1 : 0;
}

int cmd_observability(const std::string& filter, std::size_t features, std::size_t steps,
                      std::uint64_t seed, const std::string& input, const std::string& write_log) {
  JacobianLog log = input.empty() ? collect_jacobians(parse_filter(filter), features, steps, seed)
                                  : read_jacobian_log(input);
  if (!write_log.empty()) write_jacobian_log(write_log, log);
  const ObservabilityReport rep = log.filter == "riekf" ? theorem1_check(log)
                                                        : theorem2_check(log, log.mode);
  std::cout << format_report(rep);
  return rep.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Object-level SLAM filters: invariant EKF, standard EKF and their checks"};
  app.require_subcommand(1);

  SimFlags sf;
  std::vector<std::string> filters{"riekf", "stdekf", "ideal"};
  bool robust = false, both = false;
  double outliers = 0.0;
  bool corrupt_first = false;
  std::size_t threads = 0;
  std::string out_dir = "results", export_log, jacobian_log;
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo experiment on the circle world");
  sim->add_option("--filters", filters, "riekf, stdekf, ideal")->delimiter(',');
  sim->add_flag("--robust", robust, "3-sigma innovation gating");
  sim->add_flag("--with-robust", both, "run every filter with and without gating");
  sim->add_option("-m,--runs", sf.runs, "Monte-Carlo runs")->check(CLI::PositiveNumber);
  sim->add_option("--loops", sf.loops, "loops around the circle")->check(CLI::PositiveNumber);
  sim->add_option("--features", sf.features, "number of objects");
  sim->add_option("--seed", sf.seed);
  sim->add_option("--sigma-rot", sf.sigma_rot, "odometry rotation noise std (rad)");
  sim->add_option("--sigma-pos", sf.sigma_pos, "odometry position noise std (m)");
  sim->add_option("--omega-rot", sf.omega_rot, "observation rotation noise std (rad)");
  sim->add_option("--omega-pos", sf.omega_pos, "observation position noise std (m)");
  sim->add_option("--outliers", outliers, "fraction of observations corrupted by 10 sigma")
      ->check(CLI::Range(0.0, 1.0));
  sim->add_flag("--corrupt-first-sightings", corrupt_first,
                "allow outliers on the observation that initializes a feature");
  sim->add_option("--threads", threads, "worker threads (0 = all cores)");
  sim->add_option("-o,--out", out_dir, "output directory");
  sim->add_option("--export-log", export_log, "write run 0 as a measurement log");
  sim->add_option("--jacobian-log", jacobian_log, "write the Jacobians of run 0, first filter");

  std::string input, filter = "riekf", rout = "replay";
  bool rrobust = false, cv = false;
  std::vector<double> cv_sigma;
  auto* rep = app.add_subcommand("replay", "Run a filter over a measurement log");
  rep->add_option("-i,--input", input, "measurement log (JSON lines)")->required();
  rep->add_option("--filter", filter, "riekf, stdekf or ideal");
  rep->add_flag("--robust", rrobust, "3-sigma innovation gating");
  rep->add_flag("--cv-odometry", cv, "constant-velocity odometry for steps without odom rows");
  rep->add_option("--cv-sigma", cv_sigma, "constant-velocity noise std: ROT POS")->expected(2);
  rep->add_option("-o,--out", rout, "output directory");

  std::string ofilter = "riekf", olog, owrite;
  std::size_t ofeatures = 3, osteps = 40;
  std::uint64_t oseed = 1;
  auto* obs = app.add_subcommand("observability", "Null space of the observability matrix");
  obs->add_option("--filter", ofilter, "riekf, stdekf or ideal");
  obs->add_option("--features", ofeatures)->check(CLI::PositiveNumber);
  obs->add_option("--steps", osteps)->check(CLI::Range(10, 100000));
  obs->add_option("--seed", oseed);
  obs->add_option("--jacobian-log", olog, "analyze this log instead of simulating");
  obs->add_option("--write-log", owrite, "save the Jacobian log");

  std::uint64_t jseed = 1;
  std::size_t trials = 100;
  bool negative = false;
  auto* jac = app.add_subcommand("check-jacobians", "Finite-difference Jacobian self-test");
  jac->add_option("--seed", jseed);
  jac->add_option("--trials", trials)->check(CLI::PositiveNumber);
  jac->add_flag("--negative-control", negative, "flip a sign so the check must fail");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      return cmd_simulate(sf, filters, robust, both, outliers, corrupt_first, threads, out_dir, export_log,
                          jacobian_log);
    }
    if (*rep) return cmd_replay(input, filter, rrobust, cv, cv_sigma, rout);
    if (*obs) return cmd_observability(ofilter, ofeatures, osteps, oseed, olog, owrite);
    if (*jac) {
      const auto r = check_jacobians(jseed, trials, negative);
      std::cout << r.format();
      return r.passed ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
