#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "spbe/belief.hpp"
#include "spbe/belief_grid.hpp"
#include "spbe/game_model.hpp"
#include "spbe/stage_game.hpp"

namespace spbe {

struct SweepOptions {
  SolverConfig solver;
  /// 0 = all hardware threads. Results do not depend on this.
  std::size_t threads = 0;
  /// A sweep aborts when more than this fraction of nodes fails to converge.
  double max_unconverged_fraction = 0.1;
};

struct SweepResult {
  ValueTable values;
  PolicyGrid policy;
  std::size_t unconverged = 0;
  /// Nodes whose warm start was rejected and that were re-solved from scratch.
  std::size_t branch_switches = 0;
};

class SolverAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One backward step: at every grid node solve the stage fixed point against
/// `next` and record the achieved values. With symmetric solving only
/// canonical nodes are solved and their mirror images filled in.
SweepResult backward_step(const StageGame& game, const BeliefGrid& grid,
                          const ValueFunction& next, const PolicyGrid* warm,
                          const SweepOptions& options);

struct FiniteHorizonSolution {
  /// values[k] holds V_{k+1}; values.back() is the terminal reward G.
  std::vector<ValueTable> values;
  /// policies[k] holds theta_{k+1}.
  std::vector<PolicyGrid> policies;
};

/// Backward recursion from V_{T+1} = G down to t = 1. `initial_warm`, if
/// given, seeds stage T (the later stages warm-start from stage t + 1).
FiniteHorizonSolution backward_solve(const GameSpec& spec, std::size_t horizon,
                                     const ValueTable& terminal, const SweepOptions& options,
                                     const PolicyGrid* initial_warm = nullptr);

/// beta*_t(. | h^i) = theta_t[mu*_t[h^c]](. | x^i) for the finite-horizon
/// solution.
class FiniteStrategy {
 public:
  FiniteStrategy(GameSpec spec, std::vector<PolicyGrid> policies, ProductBelief initial);

  std::size_t horizon() const { return policies_.size(); }

  /// mu*_t after the given public history (t = history.size() + 1).
  ProductBelief belief(std::span<const std::size_t> history) const;

  /// Action distribution of `agent` with current own type after `history`.
  std::vector<double> operator()(std::span<const std::size_t> history, std::size_t agent,
                                 std::size_t own_type) const;

  PolicyFunction policy_function() const;

 private:
  GameSpec spec_;
  std::vector<PolicyGrid> policies_;
  ProductBelief initial_;
};

FiniteStrategy finite_policy(const GameSpec& spec, std::vector<PolicyGrid> theta,
                             const ProductBelief& initial);

}  // namespace spbe
