#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "spbe/belief.hpp"
#include "spbe/belief_grid.hpp"
#include "spbe/game_model.hpp"

namespace spbe {

struct SolverConfig {
  double damping = 0.5;
  int max_iterations = 500;
  /// A prescription profile is an equilibrium when every best-response gap is
  /// at most this.
  double eq_tolerance = 1e-6;
  double tie_tolerance = 1e-9;
  /// Two-agent symmetric games only: solve with gamma^1 = gamma^2 when the two
  /// marginals coincide, and elsewhere prefer the least asymmetric equilibrium.
  bool symmetric = false;
  /// Support enumeration with indifference solving for games where every agent
  /// has two actions.
  bool support_enumeration = true;
  std::size_t max_enumeration_slots = 8;
  std::size_t max_pure_starts = 4096;
};

/// q-values for every (agent, own type, own action), laid out like a
/// Prescription.
using ActionValues = Prescription;

struct StageFixedPointReport {
  Prescription prescription;
  /// Achieved stage value V(pi, x^i), indexed by slot (agent-major, then type).
  std::vector<double> values;
  double residual = 0.0;
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
  bool warm_started = false;
};

/// Precomputed index tables for repeated stage evaluations of one game.
class StageGame {
 public:
  explicit StageGame(const GameSpec& spec);

  const GameSpec& spec() const { return spec_; }
  std::size_t agents() const { return n_; }
  std::size_t joint_types() const { return n_joint_types_; }
  std::size_t joint_actions() const { return n_joint_actions_; }
  std::size_t type_of(std::size_t joint_type, std::size_t agent) const {
    return type_comp_[joint_type * n_ + agent];
  }
  std::size_t action_of(std::size_t joint_action, std::size_t agent) const {
    return action_comp_[joint_action * n_ + agent];
  }
  std::size_t slots() const { return slots_; }
  std::size_t slot(std::size_t agent, std::size_t type) const { return slot_offset_[agent] + type; }
  bool symmetric() const { return symmetric_; }
  bool binary_actions() const { return binary_actions_; }

 private:
  GameSpec spec_;
  std::size_t n_ = 0;
  std::size_t n_joint_types_ = 0;
  std::size_t n_joint_actions_ = 0;
  std::vector<std::size_t> type_comp_;
  std::vector<std::size_t> action_comp_;
  std::vector<std::size_t> slot_offset_;
  std::size_t slots_ = 0;
  bool symmetric_ = false;
  bool binary_actions_ = false;
};

/// The one-stage problem at a fixed common belief pi against a continuation
/// value function. With discount zero (or a null continuation) the
/// continuation is never evaluated.
class StageProblem {
 public:
  StageProblem(const StageGame& game, ProductBelief pi, const ValueFunction* continuation);

  const ProductBelief& belief() const { return pi_; }

  /// q^i(a^i | x^i) for every agent and own type when the others (and the
  /// belief update) follow `gamma`.
  void action_values(const Prescription& gamma, ActionValues& q);

  /// max over (i, x^i) of max_a q - sum_a gamma q.
  double residual(const Prescription& gamma, const ActionValues& q) const;

  /// Achieved values sum_a gamma(a|x) q(a), by slot.
  std::vector<double> stage_values(const Prescription& gamma, const ActionValues& q) const;

  int evaluations() const { return evaluations_; }

 private:
  const StageGame& game_;
  ProductBelief pi_;
  const ValueFunction* continuation_;
  double discount_;
  int evaluations_ = 0;
  std::vector<ProductBelief> next_;
  std::vector<double> cont_;   // [joint action][slot]
  std::vector<double> coef_;   // [slot(i, x)][joint action] expected continuation
  std::vector<std::vector<double>> weight_;  // [agent][type * |A^i| + action]
};

/// q(a^i) for one agent and own type.
std::vector<double> action_values(const GameSpec& spec, const ProductBelief& pi,
                                  const Prescription& gamma, const ValueFunction& continuation,
                                  std::size_t agent, std::size_t type);

/// Actions within tie_tol of the maximum, and the maximum.
std::pair<std::vector<std::size_t>, double> best_response(std::span<const double> q,
                                                          double tie_tol);

/// Sum over types and actions of |gamma^1 - gamma^2| (two-agent games).
double asymmetry(const Prescription& gamma);

/// Solves the stage fixed point in gamma at belief pi: every agent/type plays a
/// best response to the others and to the continuation induced by gamma
/// itself. A warm start is tried first; then damped best-response iteration
/// from every pure profile and the uniform profile; then, for two-action
/// games, support enumeration with indifference solving.
StageFixedPointReport stage_fixed_point(const StageGame& game, const ProductBelief& pi,
                                        const ValueFunction* continuation,
                                        const SolverConfig& config,
                                        const Prescription* warm_start = nullptr);

StageFixedPointReport stage_fixed_point(const GameSpec& spec, const ProductBelief& pi,
                                        const ValueFunction* continuation,
                                        const SolverConfig& config);

}  // namespace spbe
