#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "objslam/errors.hpp"
#include "objslam/experiment.hpp"
#include "objslam/gating.hpp"
#include "objslam/lie.hpp"
#include "objslam/metrics.hpp"
#include "objslam/observability.hpp"
#include "objslam/riekf.hpp"
#include "objslam/selfcheck.hpp"
#include "objslam/stdekf.hpp"

namespace py = pybind11;
using namespace objslam;

namespace {

py::dict report_dict(const ObservabilityReport& r) {
  py::dict d;
  d["check"] = r.check;
  d["filter"] = r.filter;
  d["mode"] = r.mode;
  d["rows"] = r.rows;
  d["cols"] = r.cols;
  d["null_dim"] = r.null_dim;
  d["expected_dim"] = r.expected_dim;
  d["residual"] = r.residual;
  d["containment"] = r.containment;
  d["passed"] = r.passed;
  d["notes"] = r.notes;
  return d;
}

py::dict experiment_dict(const ExperimentResult& res) {
  py::dict out;
  for (const auto& f : res.filters) {
    py::dict fd, nees, rmse;
    for (Block b : kAllBlocks) {
      nees[py::str(std::string(block_name(b)))] = f.final_nees(b);
      rmse[py::str(std::string(block_name(b)))] = f.final_rmse(b);
    }
    fd["nees"] = nees;
    fd["rmse"] = rmse;
    fd["diverged"] = f.diverged;
    fd["gating_decisions"] = f.gating.decisions;
    fd["gating_rejected"] = f.gating.rejected;
    fd["injected"] = f.gating.injected;
    fd["injected_rejected"] = f.gating.injected_rejected;
    out[py::str(f.config.label())] = fd;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_objslam, m) {
  m.doc() = "Invariant and standard EKFs for SLAM with object pose features";

  py::register_exception<Error>(m, "ObjslamError", PyExc_ValueError);

  m.def("skew", &skew);
  m.def("so3_exp", &so3_exp, py::arg("phi"));
  m.def("so3_log", &so3_log, py::arg("R"));
  m.def("left_jacobian", &left_jacobian, py::arg("phi"));
  m.def("left_jacobian_inverse", &left_jacobian_inverse, py::arg("phi"));

  py::class_<GroupState>(m, "GroupState")
      .def(py::init<>())
      .def_readwrite("robot_rot", &GroupState::robot_rot)
      .def_readwrite("robot_pos", &GroupState::robot_pos)
      .def_readwrite("feature_rots", &GroupState::feature_rots)
      .def_readwrite("feature_pos", &GroupState::feature_pos)
      .def_readwrite("feature_ids", &GroupState::feature_ids)
      .def_property_readonly("num_features", &GroupState::num_features)
      .def_property_readonly("dim", &GroupState::dim)
      .def_static("identity", &GroupState::identity, py::arg("ids") = std::vector<FeatureId>{})
      .def("__repr__", [](const GroupState& s) {
        return "<GroupState with " + std::to_string(s.num_features()) + " features>";
      });

  m.def("group_compose", &group_compose);
  m.def("group_inverse", &group_inverse);
  m.def("group_between", &group_between);
  m.def("group_exp", &group_exp, py::arg("xi"), py::arg("ids"));
  m.def("group_log", &group_log);

  m.def("invariant_error", &invariant_error, py::arg("truth"), py::arg("est"));
  m.def("standard_error", &standard_error, py::arg("truth"), py::arg("est"));

  m.def("riekf_propagation_jacobians",
        [](const GroupState& x, const Mat3& rot, const Vec3& pos) {
          Odometry u;
          u.rot = rot;
          u.pos = pos;
          const auto j = riekf::propagation_jacobians(x, u);
          return py::make_tuple(j.F, j.G);
        });
  m.def("riekf_observation_jacobian", &riekf::observation_jacobian);
  m.def("stdekf_observation_jacobian", &stdekf::observation_jacobian);

  m.def(
      "gate",
      [](const Vec6& y, const Mat6& S, double bound) {
        Innovation inn;
        inn.y = y;
        inn.S = S;
        const auto d = gate(inn, bound);
        return py::make_tuple(d.accepted, d.margins);
      },
      py::arg("y"), py::arg("S"), py::arg("bound") = 3.0);

  m.def(
      "run_monte_carlo",
      [](std::size_t runs, std::size_t loops, std::size_t features, std::uint64_t seed,
         const std::vector<std::string>& filters, bool robust, double outlier_rate,
         double noise_scale) {
        ExperimentConfig cfg;
        cfg.sim.monte_carlo_runs = runs;
        cfg.sim.loops = loops;
        cfg.sim.num_features = features;
        cfg.sim.seed = seed;
        cfg.sim.sigma *= noise_scale * noise_scale;
        cfg.sim.omega *= noise_scale * noise_scale;
        cfg.outlier_rate = outlier_rate;
        cfg.threads = 1;
        for (const auto& f : filters) {
          FilterConfig fc;
          fc.kind = parse_filter(f);
          fc.robust = robust;
          cfg.filters.push_back(fc);
        }
        ExperimentResult res;
        {
          py::gil_scoped_release release;
          res = run_monte_carlo(cfg);
        }
        return experiment_dict(res);
      },
      py::arg("runs") = 50, py::arg("loops") = 25, py::arg("features") = 6, py::arg("seed") = 1,
      py::arg("filters") = std::vector<std::string>{"riekf", "stdekf", "ideal"},
      py::arg("robust") = false, py::arg("outlier_rate") = 0.0, py::arg("noise_scale") = 1.0,
      "Monte-Carlo experiment; returns final-step NEES/RMSE per filter and block.");

  m.def(
      "observability_check",
      [](const std::string& filter, std::size_t features, std::size_t steps, std::uint64_t seed) {
        const JacobianLog log = collect_jacobians(parse_filter(filter), features, steps, seed);
        return report_dict(filter == "riekf" ? theorem1_check(log) : theorem2_check(log, log.mode));
      },
      py::arg("filter"), py::arg("features") = 3, py::arg("steps") = 40, py::arg("seed") = 1);

  m.def(
      "check_jacobians",
      [](std::uint64_t seed, std::size_t trials, bool negative_control) {
        const auto r = check_jacobians(seed, trials, negative_control);
        py::dict errors;
        for (const auto& e : r.entries) errors[py::str(e.name)] = e.max_error;
        return py::make_tuple(r.passed, errors);
      },
      py::arg("seed") = 1, py::arg("trials") = 100, py::arg("negative_control") = false);

  m.def(
      "export_simulation_log",
      [](const std::string& path, std::size_t loops, std::size_t features, std::uint64_t seed) {
        SimConfig cfg;
        cfg.loops = loops;
        cfg.num_features = features;
        cfg.seed = seed;
        const auto records = to_records(simulate(cfg, default_world(cfg), seed));
        write_measurement_log(path, records);
        return records.size();
      },
      py::arg("path"), py::arg("loops") = 1, py::arg("features") = 6, py::arg("seed") = 1);

  m.def(
      "replay",
      [](const std::string& path, const std::string& filter, bool robust) {
        FilterConfig fc;
        fc.kind = parse_filter(filter);
        fc.robust = robust;
        const auto records = read_measurement_log(path);
        const ReplayResult res = run_filter(fc, records);
        py::dict d;
        d["state"] = res.final_state.mean;
        d["cov"] = res.final_state.cov;
        d["diverged"] = res.diverged;
        if (res.final_truth) d["truth"] = *res.final_truth;
        return d;
      },
      py::arg("path"), py::arg("filter") = "riekf", py::arg("robust") = false);
}
