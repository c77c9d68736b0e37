#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "spbe/belief_grid.hpp"
#include "spbe/finite_horizon.hpp"
#include "spbe/game_model.hpp"
#include "spbe/stage_game.hpp"

namespace spbe {

struct FixedPointConfig {
  double grid_step = 0.02;
  /// Stop when (1 - delta) * sup |V_{k+1} - V_k| falls to this.
  double tol_value = 1e-5;
  /// Converged runs must also satisfy (1 - delta) * residual <= tol_residual.
  double tol_residual = 1e-4;
  std::size_t max_sweeps = 2000;
  /// Wall-clock limit in seconds checked between sweeps; 0 = none.
  double max_seconds = 0.0;
  /// Consecutive sweeps of growing change after which oscillation is flagged.
  std::size_t oscillation_window = 50;
  SweepOptions sweep;
};

enum class SolveStatus { converged, max_sweeps, time_budget, residual_too_large, aborted };

std::string to_string(SolveStatus status);

struct Residual {
  /// sup |V - E^{theta}[R + delta V(F(pi, theta, A), X')]| over nodes, agents, types.
  double bellman = 0.0;
  /// sup of best-response gaps of theta against V.
  double best_response_gap = 0.0;
  double total() const { return bellman + best_response_gap; }
};

struct SolveReport {
  ValueTable values;
  PolicyGrid policy;
  std::size_t sweeps = 0;
  double seconds = 0.0;
  /// (1 - delta)-normalized sup-norm change per sweep.
  std::vector<double> change_history;
  std::vector<std::size_t> branch_switch_history;
  Residual residual;
  double normalized_residual = 0.0;
  bool converged = false;
  bool oscillation = false;
  SolveStatus status = SolveStatus::max_sweeps;
  std::string message;
};

/// Joint fixed point in (V, theta) by repeated backward sweeps from V = 0,
/// each sweep warm-started from the previous policy.
SolveReport solve_fixed_point(const GameSpec& spec, const FixedPointConfig& config);

/// Multilinear interpolation of V^i(pi, x^i).
double interpolate_value(const ValueTable& values, const ProductBelief& pi, std::size_t agent,
                         std::size_t type);

/// Fixed-point residual of (V, theta), recomputed from scratch.
Residual residual(const GameSpec& spec, const ValueTable& values, const PolicyGrid& theta,
                  std::size_t threads = 0);

}  // namespace spbe
