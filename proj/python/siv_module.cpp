#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "siv/harness.hpp"
#include "siv/local_recovery.hpp"
#include "siv/store.hpp"
#include "siv/verify.hpp"

namespace py = pybind11;
using namespace siv;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Arrays are indexed [iy, ix], matching the row-major grid layout.
Array to_array(const SpectralField& f) {
  const PhysicalField p = inverse(f);
  Array out({p.n(), p.n()});
  std::memcpy(out.mutable_data(), p.values().data(), p.values().size() * sizeof(double));
  return out;
}

SpectralField from_array(const Array& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw Error("expected a square 2-D array");
  PhysicalField p(static_cast<int>(a.shape(0)));
  std::memcpy(p.values().data(), a.data(), p.values().size() * sizeof(double));
  return transform(p);
}

KeyValues to_keyvalues(const py::dict& d) {
  KeyValues kv;
  for (const auto& [k, v] : d) kv.set(py::str(k), std::string(py::str(v)));
  return kv;
}

py::dict to_dict(const KeyValues& kv) {
  py::dict d;
  for (const auto& [k, v] : kv.entries()) d[py::str(k)] = v;
  return d;
}

py::dict twin_dict(const TwinResult& r) {
  py::dict d;
  d["times"] = r.times;
  d["epsilon"] = r.epsilon;
  d["segment_epsilon"] = r.segment_epsilon;
  std::vector<double> initial, final;
  for (const auto& s : r.segments) {
    initial.push_back(s.initial_cost);
    final.push_back(s.final_cost);
  }
  d["initial_cost"] = initial;
  d["final_cost"] = final;
  return d;
}

}  // namespace

PYBIND11_MODULE(_siv, m) {
  m.doc() = "Spectral solver, adjoint reconstruction and local recovery";
  py::register_exception<Error>(m, "Error");
  m.attr("pi") = kPi;

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def(py::init([](const py::dict& d) { return ExperimentConfig::from_keyvalues(to_keyvalues(d)); }))
      .def_static("load", &ExperimentConfig::load)
      .def("to_dict", [](const ExperimentConfig& c) { return to_dict(c.to_keyvalues()); })
      .def("validate", &ExperimentConfig::validate)
      .def("segment_count", &ExperimentConfig::segment_count)
      .def("reconstruction_segment", &ExperimentConfig::reconstruction_segment)
      .def_readwrite("n_truth", &ExperimentConfig::n_truth)
      .def_readwrite("n_rec", &ExperimentConfig::n_rec)
      .def_readwrite("T", &ExperimentConfig::T)
      .def_readwrite("tau", &ExperimentConfig::tau)
      .def_readwrite("dt", &ExperimentConfig::dt)
      .def_readwrite("nu", &ExperimentConfig::nu)
      .def_readwrite("lambda_", &ExperimentConfig::lambda)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("deltas", &ExperimentConfig::deltas)
      .def_readwrite("max_cg_iters", &ExperimentConfig::max_cg_iters)
      .def("__repr__", [](const ExperimentConfig& c) { return "<ExperimentConfig\n" + c.to_keyvalues().str() + ">"; });

  py::class_<SegmentConfig>(m, "SegmentConfig")
      .def(py::init([](int n, double tau, double dt, double nu, double lambda, double t0) {
             SegmentConfig c;
             c.n = n;
             c.tau = tau;
             c.dt = dt;
             c.nu = nu;
             c.lambda = lambda;
             c.t0 = t0;
             c.validate();
             return c;
           }),
           py::arg("n") = 64, py::arg("tau") = 0.08, py::arg("dt") = 1e-3, py::arg("nu") = 1e-3,
           py::arg("lambda_") = 2e-3, py::arg("t0") = 0.0)
      .def_readwrite("n", &SegmentConfig::n)
      .def_readwrite("tau", &SegmentConfig::tau)
      .def_readwrite("dt", &SegmentConfig::dt)
      .def_readwrite("nu", &SegmentConfig::nu)
      .def_readwrite("lambda_", &SegmentConfig::lambda)
      .def_readwrite("t0", &SegmentConfig::t0)
      .def("steps", &SegmentConfig::steps);

  py::class_<FlowState>(m, "FlowState")
      .def(py::init([](const Array& ux, const Array& uy, const Array& phi, double time) {
             ControlVector c{from_array(ux), from_array(uy), from_array(phi)};
             c.project();
             return c.to_state(time);
           }),
           py::arg("ux"), py::arg("uy"), py::arg("phi"), py::arg("time") = 0.0,
           "Builds a state from grid samples; the velocity is projected to be divergence free.")
      .def_property_readonly("n", &FlowState::n)
      .def_readonly("time", &FlowState::time)
      .def_property_readonly("ux", [](const FlowState& s) { return to_array(s.ux); })
      .def_property_readonly("uy", [](const FlowState& s) { return to_array(s.uy); })
      .def_property_readonly("phi", [](const FlowState& s) { return to_array(s.phi); })
      .def("kinetic_energy", &kinetic_energy)
      .def("max_divergence", [](const FlowState& s) { return max_divergence(s.ux, s.uy); });

  m.def("grid", [](int n) {
    require_grid_size(n);
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) x[i] = PhysicalField::node(i, n);
    return x;
  });

  m.def("initial_truth", &initial_truth, py::arg("config"), py::arg("n"));
  m.def(
      "run_forward",
      [](const FlowState& s, const SegmentConfig& seg) {
        return run_forward(ControlVector::from_state(s), seg).states;
      },
      py::arg("state"), py::arg("segment"), py::call_guard<py::gil_scoped_release>(),
      "All states of the segment, from t0 to t0 + tau.");
  m.def(
      "propagate", [](const FlowState& s, const SegmentConfig& seg) { return propagate(ControlVector::from_state(s), seg); },
      py::arg("state"), py::arg("segment"), py::call_guard<py::gil_scoped_release>());

  m.def(
      "gradient_check",
      [](const ExperimentConfig& cfg, const SegmentConfig& seg, int count, double fd_step) {
        std::vector<py::dict> out;
        const auto recs = [&] {
          py::gil_scoped_release release;
          return gradient_check(cfg, seg, count, fd_step);
        }();
        for (const auto& r : recs) {
          py::dict d;
          d["direction"] = r.direction;
          d["adjoint"] = r.adjoint;
          d["finite_difference"] = r.finite_difference;
          d["relative_error"] = r.relative_error;
          out.push_back(d);
        }
        return out;
      },
      py::arg("config"), py::arg("segment"), py::arg("count") = 5, py::arg("fd_step") = 1e-3);

  m.def("verify", [] {
    std::vector<py::tuple> out;
    const auto results = [] {
      py::gil_scoped_release release;
      return run_analytic_suite();
    }();
    for (const auto& r : results) out.push_back(py::make_tuple(r.name, r.value, r.limit, r.passed));
    return out;
  }, "Analytic checks as (name, value, limit, passed) tuples.");

  m.def(
      "twin_experiment",
      [](const ExperimentConfig& cfg) {
        const TwinResult r = [&] {
          py::gil_scoped_release release;
          return twin_experiment(cfg, record_truth(cfg, initial_truth(cfg, cfg.n_truth)));
        }();
        return twin_dict(r);
      },
      py::arg("config"));

  m.def(
      "generate_truth",
      [](const ExperimentConfig& cfg, const std::filesystem::path& run, bool resume) {
        py::gil_scoped_release release;
        return generate_truth(cfg, run, resume);
      },
      py::arg("config"), py::arg("run"), py::arg("resume") = false);
  m.def(
      "reconstruct_run",
      [](const ExperimentConfig& cfg, const std::filesystem::path& run, bool resume) {
        const TwinResult r = [&] {
          py::gil_scoped_release release;
          return reconstruct_run(cfg, run, resume);
        }();
        return twin_dict(r);
      },
      py::arg("config"), py::arg("run"), py::arg("resume") = false);
  m.def("load_run_config", &load_run_config, py::arg("run"));
}
