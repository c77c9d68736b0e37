#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "spbe/artifacts.hpp"
#include "spbe/belief.hpp"
#include "spbe/infinite_horizon.hpp"
#include "spbe/simulator.hpp"
#include "spbe/stage_game.hpp"
#include "spbe/verifier.hpp"

namespace py = pybind11;
using namespace spbe;

namespace {

using Nested = std::vector<std::vector<std::vector<double>>>;

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

Nested nested(const Prescription& g) {
  Nested out(g.agents());
  for (std::size_t i = 0; i < g.agents(); ++i) {
    for (std::size_t x = 0; x < g.num_types(i); ++x) {
      auto row = g.row(i, x);
      out[i].emplace_back(row.begin(), row.end());
    }
  }
  return out;
}

Prescription prescription(const GameSpec& spec, const Nested& rows) {
  if (rows.size() != spec.agents()) throw py::value_error("gamma: one table per agent expected");
  Prescription g(spec);
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    if (rows[i].size() != spec.num_types(i)) throw py::value_error("gamma: wrong type count");
    for (std::size_t x = 0; x < spec.num_types(i); ++x) {
      if (rows[i][x].size() != spec.num_actions(i)) throw py::value_error("gamma: wrong action count");
      for (std::size_t a = 0; a < spec.num_actions(i); ++a) g(i, x, a) = rows[i][x][a];
    }
  }
  return g;
}

ProductBelief belief(const GameSpec& spec, const std::vector<std::vector<double>>& m) {
  if (m.size() != spec.agents()) throw py::value_error("belief: one marginal per agent expected");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() != spec.num_types(i)) throw py::value_error("belief: wrong marginal length");
  }
  return ProductBelief{m};
}

struct Solution {
  GameSpec spec;
  SolveReport report;
  RunConfig config;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Structured perfect Bayesian equilibria of finite dynamic games";

  py::register_exception<SpecValidationError>(m, "SpecValidationError", PyExc_ValueError);
  py::register_exception<SpecParseError>(m, "SpecParseError", PyExc_ValueError);
  py::register_exception<ArtifactMismatch>(m, "ArtifactMismatch", PyExc_ValueError);
  py::register_exception<ArtifactCorrupt>(m, "ArtifactCorrupt", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<GameSpec>(m, "GameSpec")
      .def_static("from_json", [](const std::string& text) {
        GameSpec g = spec_from_json(nlohmann::json::parse(text));
        require_valid(g);
        return g;
      })
      .def_static("load", [](const std::string& path) { return load_spec(path); })
      .def_static("public_goods", &public_goods_spec, py::arg("x_high") = 1.2,
                  py::arg("x_low") = 0.2, py::arg("delta") = 0.95)
      .def("to_json", [](const GameSpec& g) { return spec_to_json(g).dump(); })
      .def("save", [](const GameSpec& g, const std::string& path) { save_spec(g, path); })
      .def("validate", [](const GameSpec& g) { return validate_spec(g); })
      .def_property_readonly("hash", [](const GameSpec& g) { return spec_hash(g); })
      .def_property_readonly("agents", &GameSpec::agents)
      .def_readonly("type_labels", &GameSpec::type_labels)
      .def_readonly("action_labels", &GameSpec::action_labels)
      .def_readonly("discount", &GameSpec::discount)
      .def("is_symmetric", [](const GameSpec& g) { return is_symmetric(g); });

  m.def("update_marginal",
        [](const GameSpec& spec, std::size_t agent, const std::vector<double>& pi,
           const Nested& gamma, std::size_t joint_action) {
          if (agent >= spec.agents()) throw py::index_error("agent out of range");
          if (joint_action >= spec.joint_action_count()) throw py::index_error("action out of range");
          return update_marginal(spec, agent, pi, prescription(spec, gamma), joint_action);
        },
        py::arg("spec"), py::arg("agent"), py::arg("pi"), py::arg("gamma"), py::arg("joint_action"));

  m.def("joint_action", [](const GameSpec& spec, const std::vector<std::size_t>& actions) {
    return spec.action_index().flatten(actions);
  });

  m.def("stage_equilibrium",
        [](const GameSpec& spec, const std::vector<std::vector<double>>& pi, bool symmetric) {
          SolverConfig cfg;
          cfg.symmetric = symmetric && is_symmetric(spec);
          const auto r = stage_fixed_point(spec, belief(spec, pi), nullptr, cfg);
          py::dict d;
          d["prescription"] = nested(r.prescription);
          d["values"] = r.values;
          d["residual"] = r.residual;
          d["converged"] = r.converged;
          return d;
        },
        py::arg("spec"), py::arg("pi"), py::arg("symmetric") = false);

  py::class_<Solution>(m, "Solution")
      .def_property_readonly("status", [](const Solution& s) { return to_string(s.report.status); })
      .def_property_readonly("converged", [](const Solution& s) { return s.report.converged; })
      .def_property_readonly("sweeps", [](const Solution& s) { return s.report.sweeps; })
      .def_property_readonly("change_history", [](const Solution& s) { return s.report.change_history; })
      .def_property_readonly("normalized_residual",
                             [](const Solution& s) { return s.report.normalized_residual; })
      .def("value",
           [](const Solution& s, const std::vector<std::vector<double>>& pi, std::size_t agent,
              std::size_t type) {
             return interpolate_value(s.report.values, belief(s.spec, pi), agent, type);
           },
           py::arg("pi"), py::arg("agent"), py::arg("type"))
      .def("prescription",
           [](const Solution& s, const std::vector<std::vector<double>>& pi) {
             return nested(s.report.policy.lookup(belief(s.spec, pi)));
           },
           py::arg("pi"))
      .def("report", [](const Solution& s) {
        return to_python(solve_report_json(s.spec, s.report, s.config));
      })
      .def("save", [](const Solution& s, const std::string& dir) {
        const std::filesystem::path d(dir);
        std::filesystem::create_directories(d);
        write_json(d / "value.json", value_table_json(s.spec, s.report.values, s.config));
        write_json(d / "policy.json", policy_grid_json(s.spec, s.report.policy, s.config));
        write_json(d / "report.json", solve_report_json(s.spec, s.report, s.config));
      });

  m.def("solve",
        [](const GameSpec& spec, double grid_step, double tol_value, double tol_residual,
           std::size_t max_sweeps, bool symmetric, std::size_t threads, double time_budget) {
          FixedPointConfig cfg;
          cfg.grid_step = grid_step;
          cfg.tol_value = tol_value;
          cfg.tol_residual = tol_residual;
          cfg.max_sweeps = max_sweeps;
          cfg.max_seconds = time_budget;
          cfg.sweep.solver.symmetric = symmetric && is_symmetric(spec);
          cfg.sweep.threads = threads;
          Solution s;
          s.spec = spec;
          {
            py::gil_scoped_release release;
            s.report = solve_fixed_point(spec, cfg);
          }
          s.config.command = "solve";
          s.config.grid_step = grid_step;
          s.config.tol_value = tol_value;
          s.config.tol_residual = tol_residual;
          s.config.max_sweeps = max_sweeps;
          s.config.symmetric = symmetric;
          return s;
        },
        py::arg("spec"), py::arg("grid_step") = 0.02, py::arg("tol_value") = 1e-5,
        py::arg("tol_residual") = 1e-4, py::arg("max_sweeps") = 2000, py::arg("symmetric") = false,
        py::arg("threads") = 0, py::arg("time_budget") = 0.0);

  m.def("verify",
        [](const Solution& s, std::size_t points, std::size_t samples, std::uint64_t seed,
           std::size_t lemma4_horizon) {
          SuiteConfig cfg;
          cfg.points = points;
          cfg.deviation.samples = samples;
          cfg.deviation.seed = seed;
          cfg.lemma4_horizon = lemma4_horizon;
          cfg.sweep.solver.symmetric = s.config.symmetric;
          VerificationReport r;
          {
            py::gil_scoped_release release;
            r = verify_solution(s.spec, s.report.values, s.report.policy, cfg);
          }
          return to_python(to_json(r));
        },
        py::arg("solution"), py::arg("points") = 64, py::arg("samples") = 2000,
        py::arg("seed") = 0, py::arg("lemma4_horizon") = 5);

  m.def("simulate",
        [](const Solution& s, std::size_t lattice, std::size_t seeds, std::size_t horizon,
           double threshold, std::uint64_t seed) {
          const auto initial = belief_lattice(s.spec, lattice);
          LearningStats stats;
          {
            py::gil_scoped_release release;
            stats = markov_chain_ensemble(s.spec, s.report.policy, initial, seeds, horizon,
                                          threshold, seed, 0);
          }
          return to_python(to_json(stats, false));
        },
        py::arg("solution"), py::arg("lattice") = 5, py::arg("seeds") = 40, py::arg("horizon") = 50,
        py::arg("threshold") = 0.95, py::arg("seed") = 0);

  m.def("coordination_benchmarks", &coordination_benchmarks, py::arg("x"));
}
