#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spbe/belief.hpp"
#include "spbe/belief_grid.hpp"
#include "spbe/game_model.hpp"

namespace spbe {

struct TrajectoryStep {
  std::vector<std::size_t> types;
  std::vector<std::size_t> actions;
  ProductBelief belief;  // pi_t, before the stage-t update
  std::vector<double> rewards;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  ProductBelief final_belief;  // pi_{horizon + 1}
  std::uint64_t seed = 0;
  std::string policy_id;
};

/// Plays `horizon` stages from pi_1 with theta looked up at the nearest grid
/// node. Types come from Q0 unless `types` is given.
Trajectory sample_trajectory(const GameSpec& spec, const PolicyGrid& theta,
                             const ProductBelief& pi_1,
                             const std::optional<std::vector<std::size_t>>& types,
                             std::size_t horizon, std::uint64_t seed,
                             std::uint64_t stream_id = 0);

/// Columns t, x1.., a1.., pi<i>_<label>.., r1.. (belief on every type but the
/// last of each agent).
void write_trajectory_csv(const GameSpec& spec, const Trajectory& trajectory, std::ostream& out);

inline constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

/// First t (1-based, pi_1 counts) at which every agent's belief on its true
/// current type is at least `threshold`; kNever if it does not happen.
std::size_t time_to_concentration(const Trajectory& trajectory, double threshold);

struct RunOutcome {
  std::size_t initial = 0;
  std::size_t seed_index = 0;
  std::vector<std::size_t> types;
  std::size_t time_to_concentration = kNever;
  /// min over agents of the final belief on the true type.
  double terminal_accuracy = 0.0;
  std::vector<double> discounted_reward;
};

struct InitialStats {
  ProductBelief belief;
  std::size_t runs = 0;
  std::size_t concentrated = 0;
  double median_time = 0.0;  // +inf when fewer than half concentrate
  double mean_terminal_accuracy = 0.0;
};

struct LearningStats {
  double threshold = 0.95;
  std::size_t horizon = 0;
  std::size_t runs = 0;
  std::size_t concentrated = 0;
  double median_time = 0.0;
  std::vector<double> mean_discounted_reward;
  std::vector<double> discounted_reward_se;
  std::vector<InitialStats> per_initial;
  std::vector<RunOutcome> outcomes;

  /// Fraction of runs with time_to_concentration <= t.
  double fraction_within(std::size_t t) const;
};

LearningStats markov_chain_ensemble(const GameSpec& spec, const PolicyGrid& theta,
                                    const std::vector<ProductBelief>& initial_beliefs,
                                    std::size_t n_seeds, std::size_t horizon, double threshold,
                                    std::uint64_t seed, std::size_t threads = 0);

/// Two-agent beliefs (P(type 0) per agent) on the k x k lattice of cell midpoints.
std::vector<ProductBelief> belief_lattice(const GameSpec& spec, std::size_t k);

/// (1 - x/2, (1 - x/2)^2): per-agent payoff under full and under no coordination.
std::pair<double, double> coordination_benchmarks(double x);

nlohmann::json to_json(const LearningStats& stats, bool include_runs = false);

}  // namespace spbe
