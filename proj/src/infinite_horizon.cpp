#include "spbe/infinite_horizon.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "spbe/parallel.hpp"

namespace spbe {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_sweeps: return "max_sweeps";
    case SolveStatus::time_budget: return "time_budget";
    case SolveStatus::residual_too_large: return "residual_too_large";
    case SolveStatus::aborted: return "aborted";
  }
  return "unknown";
}

double interpolate_value(const ValueTable& values, const ProductBelief& pi, std::size_t agent,
                         std::size_t type) {
  return values.interpolate(pi, agent, type);
}

Residual residual(const GameSpec& spec, const ValueTable& values, const PolicyGrid& theta,
                  std::size_t threads) {
  if (!(values.grid() == theta.grid())) {
    throw std::invalid_argument("residual: value and policy grids differ");
  }
  StageGame game(spec);
  const BeliefGrid& grid = values.grid();
  std::vector<double> bellman(grid.size(), 0.0);
  std::vector<double> gap(grid.size(), 0.0);
  parallel_for(grid.size(), threads, [&](std::size_t node) {
    StageProblem problem(game, grid.belief_at(node), &values);
    ActionValues q(spec);
    const Prescription& gamma = theta.at(node);
    problem.action_values(gamma, q);
    gap[node] = problem.residual(gamma, q);
    const std::vector<double> achieved = problem.stage_values(gamma, q);
    auto stored = values.node_values(node);
    double worst = 0.0;
    for (std::size_t s = 0; s < achieved.size(); ++s) {
      const double d = std::abs(stored[s] - achieved[s]);
      worst = std::isnan(d) ? d : std::max(worst, d);
    }
    bellman[node] = worst;
  });
  Residual r;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    r.bellman = std::isnan(bellman[node]) ? bellman[node] : std::max(r.bellman, bellman[node]);
    r.best_response_gap = std::max(r.best_response_gap, gap[node]);
  }
  return r;
}

SolveReport solve_fixed_point(const GameSpec& spec, const FixedPointConfig& config) {
  const double delta = spec.discount;
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::invalid_argument("solve_fixed_point: discount must be in [0, 1)");
  }
  const double scale = 1.0 - delta;
  StageGame game(spec);
  BeliefGrid grid(spec, config.grid_step);

  SolveReport report;
  report.values = ValueTable(grid, 0.0);
  report.policy = PolicyGrid(grid, spec);
  const PolicyGrid* warm = nullptr;
  std::size_t growing = 0;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  bool out_of_time = false;

  while (report.sweeps < config.max_sweeps) {
    if (config.max_seconds > 0.0 && report.sweeps > 0 && elapsed() >= config.max_seconds) {
      out_of_time = true;
      break;
    }
    SweepResult step;
    try {
      step = backward_step(game, grid, report.values, warm, config.sweep);
    } catch (const SolverAborted& e) {
      report.status = SolveStatus::aborted;
      report.message = e.what();
      report.seconds = elapsed();
      return report;
    }
    const double change = scale * step.values.max_abs_difference(report.values);
    report.change_history.push_back(change);
    report.branch_switch_history.push_back(step.branch_switches);
    report.values = std::move(step.values);
    report.policy = std::move(step.policy);
    warm = &report.policy;
    ++report.sweeps;

    const std::size_t k = report.change_history.size();
    if (k >= 2 && report.change_history[k - 1] > report.change_history[k - 2]) {
      if (++growing >= config.oscillation_window) report.oscillation = true;
    } else {
      growing = 0;
    }
    // With no continuation one sweep is already the fixed point.
    if (change <= config.tol_value || delta == 0.0) break;
  }

  report.residual = residual(spec, report.values, report.policy, config.sweep.threads);
  report.normalized_residual = scale * report.residual.total();
  const bool settled =
      !report.change_history.empty() &&
      (report.change_history.back() <= config.tol_value || delta == 0.0);
  if (!settled && out_of_time) {
    report.status = SolveStatus::time_budget;
    report.message = "time budget exhausted before the value change fell below tol_value";
  } else if (!settled) {
    report.status = SolveStatus::max_sweeps;
    report.message = "value change did not fall below tol_value within max_sweeps";
  } else if (!(report.normalized_residual <= config.tol_residual)) {
    report.status = SolveStatus::residual_too_large;
    report.message = "fixed-point residual exceeds tol_residual";
  } else {
    report.status = SolveStatus::converged;
    report.converged = true;
  }
  report.seconds = elapsed();
  return report;
}

}  // namespace spbe
