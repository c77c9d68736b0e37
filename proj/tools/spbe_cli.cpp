#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "spbe/artifacts.hpp"
#include "spbe/finite_horizon.hpp"
#include "spbe/game_model.hpp"
#include "spbe/infinite_horizon.hpp"
#include "spbe/simulator.hpp"
#include "spbe/verifier.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit {
  kOk = 0,
  kVerificationFailed = 1,
  kValidation = 2,
  kNotConverged = 3,
  kIo = 4,
  kMismatch = 5,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string spec_path;
  double grid_step = 0.02;
  double tol_value = 1e-5;
  double tol_residual = 1e-4;
  std::size_t max_sweeps = 2000;
  double time_budget = 0.0;
  std::uint64_t seed = 0;
  bool symmetric = false;
  std::size_t threads = 0;
  std::string out = ".";

  std::size_t horizon = 1;
  std::string terminal = "zero";

  std::size_t points = 64;
  std::size_t samples = 2000;
  std::size_t lemma4_horizon = 5;
  double eps_dev = 1e-3;

  std::size_t sim_horizon = 50;
  std::size_t lattice = 5;
  std::size_t seeds = 40;
  double threshold = 0.95;
  std::size_t trajectories = 3;

  std::size_t agent = 1;
  std::string type_label;

  double x_high = 1.2;
  double x_low = 0.2;
  double delta = 0.95;
};

void validate(const Options& o) {
  if (!(o.grid_step > 0.0 && o.grid_step <= 0.5)) {
    throw ConfigError("--grid-step must lie in (0, 0.5], got " + std::to_string(o.grid_step));
  }
  if (!(o.tol_value > 0.0)) throw ConfigError("--tol-v must be positive");
  if (!(o.tol_residual > 0.0)) throw ConfigError("--tol-res must be positive");
  if (o.max_sweeps == 0) throw ConfigError("--max-sweeps must be positive");
  if (o.time_budget < 0.0) throw ConfigError("--time-budget must be non-negative");
}

spbe::RunConfig run_config(const std::string& command, const Options& o) {
  spbe::RunConfig c;
  c.command = command;
  c.spec_path = o.spec_path;
  c.grid_step = o.grid_step;
  c.tol_value = o.tol_value;
  c.tol_residual = o.tol_residual;
  c.max_sweeps = o.max_sweeps;
  c.seed = o.seed;
  c.symmetric = o.symmetric;
  return c;
}

spbe::SweepOptions sweep_options(const Options& o) {
  spbe::SweepOptions s;
  s.solver.symmetric = o.symmetric;
  s.threads = o.threads;
  return s;
}

fs::path out_dir(const Options& o) {
  fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw spbe::IoError("cannot create output directory '" + dir.string() + "'");
  }
  return dir;
}

int cmd_solve(const Options& o) {
  validate(o);
  spbe::GameSpec spec = spbe::load_spec(o.spec_path);
  if (o.symmetric && !spbe::is_symmetric(spec)) {
    throw ConfigError("--symmetric requires a two-agent game invariant under swapping agents");
  }
  const fs::path dir = out_dir(o);
  spbe::FixedPointConfig cfg;
  cfg.grid_step = o.grid_step;
  cfg.tol_value = o.tol_value;
  cfg.tol_residual = o.tol_residual;
  cfg.max_sweeps = o.max_sweeps;
  cfg.max_seconds = o.time_budget;
  cfg.sweep = sweep_options(o);
  const spbe::SolveReport report = spbe::solve_fixed_point(spec, cfg);
  const spbe::RunConfig rc = run_config("solve", o);
  spbe::write_json(dir / "value.json", spbe::value_table_json(spec, report.values, rc));
  spbe::write_json(dir / "policy.json", spbe::policy_grid_json(spec, report.policy, rc));
  spbe::write_json(dir / "report.json", spbe::solve_report_json(spec, report, rc));
  std::fprintf(stderr, "%s after %zu sweeps (%.1f s), normalized residual %.3g\n",
               spbe::to_string(report.status).c_str(), report.sweeps, report.seconds,
               report.normalized_residual);
  if (!report.converged) {
    std::fprintf(stderr, "not converged: %s\n", report.message.c_str());
    return kNotConverged;
  }
  return kOk;
}

int cmd_solve_finite(const Options& o) {
  validate(o);
  if (o.horizon < 1) throw ConfigError("--horizon must be at least 1");
  spbe::GameSpec spec = spbe::load_spec(o.spec_path);
  if (o.symmetric && !spbe::is_symmetric(spec)) {
    throw ConfigError("--symmetric requires a two-agent game invariant under swapping agents");
  }
  const fs::path dir = out_dir(o);
  spbe::ValueTable terminal;
  if (o.terminal == "zero") {
    terminal = spbe::ValueTable(spbe::BeliefGrid(spec, o.grid_step), 0.0);
  } else {
    terminal = spbe::load_value_table(spec, o.terminal);
  }
  const spbe::RunConfig rc = run_config("solve-finite", o);
  spbe::FiniteHorizonSolution sol;
  try {
    sol = spbe::backward_solve(spec, o.horizon, terminal, sweep_options(o));
  } catch (const spbe::SolverAborted& e) {
    std::fprintf(stderr, "aborted: %s\n", e.what());
    return kNotConverged;
  }
  json stages = json::array();
  std::size_t unconverged = 0;
  for (std::size_t t = 0; t < o.horizon; ++t) {
    const std::string v = "value_t" + std::to_string(t + 1) + ".json";
    const std::string p = "policy_t" + std::to_string(t + 1) + ".json";
    spbe::write_json(dir / v, spbe::value_table_json(spec, sol.values[t], rc));
    spbe::write_json(dir / p, spbe::policy_grid_json(spec, sol.policies[t], rc));
    unconverged += sol.policies[t].unconverged_count();
    stages.push_back({{"t", t + 1}, {"value", v}, {"policy", p},
                      {"unconverged_points", sol.policies[t].unconverged_count()}});
  }
  json summary = {{"format", "spbe.finite_solution/1"},
                  {"spec_hash", spbe::spec_hash(spec)},
                  {"config", spbe::to_json(rc)},
                  {"horizon", o.horizon},
                  {"terminal", o.terminal == "zero" ? "zero" : "file"},
                  {"stages", stages},
                  {"unconverged_points", unconverged}};
  spbe::write_json(dir / "finite_report.json", summary);
  return kOk;
}

int cmd_verify(const Options& o) {
  spbe::GameSpec spec = spbe::load_spec(o.spec_path);
  const fs::path dir(o.out);
  const spbe::ValueTable values = spbe::load_value_table(spec, dir / "value.json");
  const spbe::PolicyGrid policy = spbe::load_policy_grid(spec, dir / "policy.json");
  if (!(values.grid() == policy.grid())) {
    throw spbe::ArtifactMismatch("value and policy artifacts use different grids");
  }
  spbe::SuiteConfig cfg;
  cfg.points = o.points;
  cfg.deviation.samples = o.samples;
  cfg.deviation.seed = o.seed;
  cfg.deviation.eps_dev = o.eps_dev;
  cfg.deviation.threads = o.threads;
  cfg.lemma4_horizon = o.lemma4_horizon;
  cfg.tol_value = o.tol_value;
  cfg.tol_residual = o.tol_residual;
  cfg.sweep = sweep_options(o);
  cfg.sweep.solver.symmetric = o.symmetric && spbe::is_symmetric(spec);
  const spbe::VerificationReport report = spbe::verify_solution(spec, values, policy, cfg);
  json doc = spbe::to_json(report);
  doc["format"] = "spbe.verification/1";
  doc["spec_hash"] = spbe::spec_hash(spec);
  doc["config"] = spbe::to_json(run_config("verify", o));
  spbe::write_json(dir / "verification.json", doc);
  std::fprintf(stderr, "residual %s, lemma4 %s, deviations %s\n",
               report.residual_pass ? "pass" : "FAIL", report.lemma4_pass ? "pass" : "FAIL",
               report.deviations_pass ? "pass" : "FAIL");
  return report.passed() ? kOk : kVerificationFailed;
}

int cmd_simulate(const Options& o) {
  if (!(o.threshold > 0.0 && o.threshold <= 1.0)) throw ConfigError("--threshold must be in (0, 1]");
  if (o.sim_horizon < 1) throw ConfigError("--horizon must be at least 1");
  if (o.seeds < 1 || o.lattice < 1) throw ConfigError("--seeds and --lattice must be positive");
  spbe::GameSpec spec = spbe::load_spec(o.spec_path);
  const fs::path dir(o.out);
  const spbe::PolicyGrid policy = spbe::load_policy_grid(spec, dir / "policy.json");
  const auto initial = spbe::belief_lattice(spec, o.lattice);
  const spbe::LearningStats stats = spbe::markov_chain_ensemble(
      spec, policy, initial, o.seeds, o.sim_horizon, o.threshold, o.seed, o.threads);
  json doc = spbe::to_json(stats, true);
  doc["format"] = "spbe.learning_stats/1";
  doc["spec_hash"] = spbe::spec_hash(spec);
  doc["config"] = spbe::to_json(run_config("simulate", o));
  spbe::write_json(dir / "learning.json", doc);
  const spbe::ProductBelief center = spbe::ProductBelief::initial(spec);
  for (std::size_t k = 0; k < o.trajectories; ++k) {
    const spbe::Trajectory tr =
        spbe::sample_trajectory(spec, policy, center, std::nullopt, o.sim_horizon, o.seed, k);
    const fs::path path = dir / ("trajectory_" + std::to_string(k) + ".csv");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw spbe::IoError("cannot write '" + path.string() + "'");
    spbe::write_trajectory_csv(spec, tr, out);
  }
  std::fprintf(stderr, "%zu runs, %.1f%% concentrated within 10 rounds\n", stats.runs,
               100.0 * stats.fraction_within(10));
  return kOk;
}

int cmd_export_surface(const Options& o) {
  spbe::GameSpec spec = spbe::load_spec(o.spec_path);
  if (spec.agents() != 2 || spec.num_types(0) != 2 || spec.num_types(1) != 2) {
    throw ConfigError("export-surface needs two agents with two types each");
  }
  if (o.agent < 1 || o.agent > 2) throw ConfigError("--agent must be 1 or 2");
  const std::size_t agent = o.agent - 1;
  const auto& labels = spec.type_labels[agent];
  const auto it = std::find(labels.begin(), labels.end(), o.type_label);
  if (it == labels.end()) throw ConfigError("unknown type label '" + o.type_label + "'");
  const std::size_t type = static_cast<std::size_t>(it - labels.begin());
  const std::size_t contribute = spec.num_actions(agent) - 1;

  const fs::path dir(o.out);
  const spbe::PolicyGrid policy = spbe::load_policy_grid(spec, dir / "policy.json");
  const spbe::BeliefGrid& grid = policy.grid();
  char delta[32];
  std::snprintf(delta, sizeof delta, "%g", spec.discount);
  const fs::path path =
      dir / ("surface_agent" + std::to_string(o.agent) + "_" + o.type_label + "_d" + delta + ".csv");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw spbe::IoError("cannot write '" + path.string() + "'");
  out << "pi1_" << spec.type_labels[0][0] << ",pi2_" << spec.type_labels[1][0] << ",gamma"
      << o.agent << "_" << spec.action_labels[agent][contribute] << "_given_" << o.type_label
      << "\n";
  char row[96];
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const spbe::ProductBelief pi = grid.belief_at(node);
    std::snprintf(row, sizeof row, "%.17g,%.17g,%.17g\n", pi[0][0], pi[1][0],
                  policy.at(node)(agent, type, contribute));
    out << row;
  }
  std::fprintf(stderr, "wrote %s\n", path.string().c_str());
  return kOk;
}

int cmd_public_goods(const Options& o) {
  if (!(o.delta >= 0.0 && o.delta < 1.0)) throw ConfigError("--delta must lie in [0, 1)");
  spbe::GameSpec spec = spbe::public_goods_spec(o.x_high, o.x_low, o.delta);
  spbe::require_valid(spec);
  spbe::save_spec(spec, o.spec_path);
  return kOk;
}

void add_solver_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("spec", o.spec_path, "Game spec JSON")->required();
  cmd->add_option("--grid-step", o.grid_step, "Belief grid step h");
  cmd->add_option("--tol-v", o.tol_value, "Tolerance on the normalized value change");
  cmd->add_option("--tol-res", o.tol_residual, "Tolerance on the normalized residual");
  cmd->add_option("--max-sweeps", o.max_sweeps, "Sweep limit");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_flag("--symmetric", o.symmetric, "Solve symmetric games on the symmetric branch");
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--out", o.out, "Artifact directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured perfect Bayesian equilibria of finite dynamic games"};
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "Solve the infinite-horizon fixed point");
  add_solver_flags(solve, o);
  solve->add_option("--time-budget", o.time_budget, "Stop after this many seconds (0 = none)");

  auto* finite = app.add_subcommand("solve-finite", "Backward recursion over a finite horizon");
  add_solver_flags(finite, o);
  finite->add_option("--horizon", o.horizon, "Horizon T")->required();
  finite->add_option("--terminal", o.terminal, "Terminal value artifact or 'zero'");

  auto* verify = app.add_subcommand("verify", "Check solved artifacts");
  add_solver_flags(verify, o);
  verify->add_option("--points", o.points, "Sampled (belief, type) points");
  verify->add_option("--samples", o.samples, "Monte Carlo rollouts per test");
  verify->add_option("--lemma4-horizon", o.lemma4_horizon, "Horizon of the consistency check");
  verify->add_option("--eps-dev", o.eps_dev, "Deviation tolerance (normalized)");

  auto* simulate = app.add_subcommand("simulate", "Simulate equilibrium play");
  add_solver_flags(simulate, o);
  simulate->add_option("--horizon", o.sim_horizon, "Rounds per trajectory");
  simulate->add_option("--lattice", o.lattice, "Initial beliefs per axis");
  simulate->add_option("--seeds", o.seeds, "Runs per initial belief");
  simulate->add_option("--threshold", o.threshold, "Concentration threshold");
  simulate->add_option("--trajectories", o.trajectories, "Trajectory CSVs to write");

  auto* surface = app.add_subcommand("export-surface", "Export a prescription surface as CSV");
  add_solver_flags(surface, o);
  surface->add_option("--agent", o.agent, "Agent (1-based)")->required();
  surface->add_option("--type", o.type_label, "Own type label")->required();

  auto* pg = app.add_subcommand("public-goods", "Write the two-agent public goods game spec");
  pg->add_option("path", o.spec_path, "Output spec JSON")->required();
  pg->add_option("--x-high", o.x_high, "Contribution cost of type H");
  pg->add_option("--x-low", o.x_low, "Contribution cost of type L");
  pg->add_option("--delta", o.delta, "Discount factor");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*solve) return cmd_solve(o);
    if (*finite) return cmd_solve_finite(o);
    if (*verify) return cmd_verify(o);
    if (*simulate) return cmd_simulate(o);
    if (*surface) return cmd_export_surface(o);
    if (*pg) return cmd_public_goods(o);
  } catch (const ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kValidation;
  } catch (const spbe::SpecValidationError& e) {
    std::cerr << "invalid game spec:\n";
    for (const auto& v : e.violations()) std::cerr << "  " << v << "\n";
    return kValidation;
  } catch (const spbe::SpecParseError& e) {
    std::cerr << "invalid game spec: " << e.what() << "\n";
    return kValidation;
  } catch (const spbe::ArtifactCorrupt& e) {
    std::cerr << "corrupt artifact: " << e.what() << "\n";
    return kValidation;
  } catch (const spbe::ArtifactMismatch& e) {
    std::cerr << "artifact mismatch: " << e.what() << "\n";
    return kMismatch;
  } catch (const spbe::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
