#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "spbe/belief.hpp"
#include "spbe/belief_grid.hpp"
#include "spbe/finite_horizon.hpp"
#include "spbe/game_model.hpp"
#include "spbe/infinite_horizon.hpp"

namespace spbe {

/// What a strategy may condition on at stage t.
struct StrategyContext {
  std::size_t t;  // 1-based
  std::size_t agent;
  std::size_t own_type;
  const ProductBelief& belief;
  std::span<const std::size_t> history;  // joint actions of stages 1..t-1
  const Prescription& equilibrium;       // theta[belief]
};

/// Writes the agent's action distribution into `out` (|A^i| entries).
using StrategyEvaluator = std::function<void(const StrategyContext&, std::span<double>)>;

struct NamedStrategy {
  std::string name;
  StrategyEvaluator strategy;
};

StrategyEvaluator equilibrium_strategy();
/// Plays `action` at stage 1, the equilibrium afterwards.
StrategyEvaluator one_step_deviation(std::size_t action);
StrategyEvaluator constant_action(std::size_t action);
StrategyEvaluator uniform_random();
/// Maximizes the expected stage reward against the equilibrium play of the
/// others; ties go to the lowest action index.
StrategyEvaluator myopic_greedy(const GameSpec& spec);

/// One-step pure deviations, always-action, uniform random and myopic greedy.
std::vector<NamedStrategy> deviation_library(const GameSpec& spec, std::size_t agent);

class EnumerationTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact W over `horizon` stages by full tree enumeration: agent `agent`
/// follows `strategy`, the others follow `others`, beliefs move with the
/// equilibrium prescriptions and `terminal` (nullptr = 0) is paid at stage
/// horizon + 1.
double reward_to_go_exact(const GameSpec& spec, const PolicyFunction& equilibrium,
                          const StrategyEvaluator& strategy, const StrategyEvaluator& others,
                          std::size_t agent, const ProductBelief& pi, std::size_t own_type,
                          std::size_t horizon, const ValueFunction* terminal,
                          double node_cap = 4e6);

struct DeviationConfig {
  /// Tolerance on (1 - delta)-normalized payoffs.
  double eps_dev = 1e-3;
  std::size_t samples = 2000;
  /// 0 = smallest horizon whose tail bound is at most eps_dev / 10.
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

/// delta^T (R_max / (1 - delta) + V_max), normalized by (1 - delta).
double tail_bound(const GameSpec& spec, double v_max, std::size_t horizon);
std::size_t auto_horizon(const GameSpec& spec, double v_max, double eps_dev);

/// Monte Carlo reward-to-go with terminal V. Returns the mean and its
/// standard error (raw units).
struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};
MonteCarloEstimate reward_to_go_mc(const GameSpec& spec, const PolicyFunction& equilibrium,
                                   const StrategyEvaluator& strategy, std::size_t agent,
                                   const ProductBelief& pi, std::size_t own_type,
                                   std::size_t horizon, const ValueFunction* terminal,
                                   std::size_t samples, std::uint64_t seed,
                                   std::uint64_t stream_id, std::size_t threads = 0);

struct DeviationEntry {
  std::size_t agent = 0;
  std::size_t own_type = 0;
  ProductBelief belief;
  std::string deviation;
  double reward_to_go = 0.0;  // raw W
  double value = 0.0;         // raw V(pi, x^i)
  double gap = 0.0;           // (1 - delta)(W - V)
  double standard_error = 0.0;
  double tail = 0.0;
  std::size_t horizon = 0;
  std::size_t samples = 0;
  bool pass = false;
};

DeviationEntry deviation_gap_mc(const GameSpec& spec, const ValueTable& values,
                                const PolicyGrid& theta, std::size_t agent,
                                const ProductBelief& pi, std::size_t own_type,
                                const NamedStrategy& deviation, const DeviationConfig& config,
                                std::uint64_t stream_id = 0);

struct Lemma4Result {
  double discrepancy = 0.0;  // max |V_t - V|
  double normalized = 0.0;   // (1 - delta) * discrepancy
  std::vector<double> per_stage;
};

/// backward_solve with G = V, warm-started from theta when given.
Lemma4Result lemma4_check(const GameSpec& spec, const ValueTable& values, std::size_t horizon,
                          const SweepOptions& options, const PolicyGrid* theta = nullptr);

struct SuiteConfig {
  std::size_t points = 64;
  DeviationConfig deviation;
  std::size_t lemma4_horizon = 5;
  double tol_value = 1e-5;
  double tol_residual = 1e-4;
  SweepOptions sweep;
};

struct VerificationReport {
  Residual residual;
  double normalized_residual = 0.0;
  /// (1 - delta) * Bellman residual at grid nodes.
  double interpolation_slack = 0.0;
  Lemma4Result lemma4;
  double lemma4_tolerance = 0.0;
  std::vector<DeviationEntry> deviations;
  bool residual_pass = false;
  bool lemma4_pass = false;
  bool deviations_pass = false;
  bool passed() const { return residual_pass && lemma4_pass && deviations_pass; }
};

/// Draws `points` (agent, grid node, own type) triples from the seed.
struct SamplePoint {
  std::size_t agent;
  std::size_t node;
  std::size_t own_type;
};
std::vector<SamplePoint> sample_points(const GameSpec& spec, const BeliefGrid& grid,
                                       std::size_t count, std::uint64_t seed);

std::vector<DeviationEntry> deviation_suite(const GameSpec& spec, const ValueTable& values,
                                            const PolicyGrid& theta,
                                            const std::vector<SamplePoint>& points,
                                            const DeviationConfig& config);

VerificationReport verify_solution(const GameSpec& spec, const ValueTable& values,
                                   const PolicyGrid& theta, const SuiteConfig& config);

nlohmann::json to_json(const DeviationEntry& entry);
nlohmann::json to_json(const VerificationReport& report);

}  // namespace spbe
