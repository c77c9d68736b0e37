#include "spbe/finite_horizon.hpp"

#include <string>

#include "spbe/parallel.hpp"

namespace spbe {

namespace {

Prescription swap_agents(const Prescription& gamma) {
  Prescription out = gamma;
  for (std::size_t x = 0; x < gamma.num_types(0); ++x) {
    auto a = gamma.row(0, x);
    auto b = gamma.row(1, x);
    std::copy(b.begin(), b.end(), out.row(0, x).begin());
    std::copy(a.begin(), a.end(), out.row(1, x).begin());
  }
  return out;
}

}  // namespace

SweepResult backward_step(const StageGame& game, const BeliefGrid& grid,
                          const ValueFunction& next, const PolicyGrid* warm,
                          const SweepOptions& options) {
  const GameSpec& spec = game.spec();
  SweepResult result{ValueTable(grid), PolicyGrid(grid, spec), 0, 0};
  const bool mirror = options.solver.symmetric;
  if (mirror && !game.symmetric()) {
    throw std::invalid_argument("symmetric solving requested for an asymmetric game");
  }

  std::vector<std::size_t> nodes;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    if (!mirror || grid.canonical(node)) nodes.push_back(node);
  }

  std::vector<char> switched(grid.size(), 0);
  parallel_for(nodes.size(), options.threads, [&](std::size_t k) {
    const std::size_t node = nodes[k];
    const Prescription* start = warm != nullptr ? &warm->at(node) : nullptr;
    StageFixedPointReport r =
        stage_fixed_point(game, grid.belief_at(node), &next, options.solver, start);
    switched[node] = start != nullptr && !r.warm_started;
    auto out = result.values.node_values(node);
    std::copy(r.values.begin(), r.values.end(), out.begin());
    result.policy.at(node) = std::move(r.prescription);
    result.policy.diagnostics(node) =
        PointDiagnostics{r.residual, r.iterations, r.restarts, r.converged, r.warm_started};
  });

  if (mirror) {
    const std::size_t nt = spec.num_types(0);
    for (std::size_t node : nodes) {
      const std::size_t image = grid.mirror_node(node);
      if (image == node) continue;
      for (std::size_t x = 0; x < nt; ++x) {
        result.values.at(image, 0, x) = result.values.at(node, 1, x);
        result.values.at(image, 1, x) = result.values.at(node, 0, x);
      }
      result.policy.at(image) = swap_agents(result.policy.at(node));
      result.policy.diagnostics(image) = result.policy.diagnostics(node);
      switched[image] = switched[node];
    }
  }

  result.unconverged = result.policy.unconverged_count();
  for (char s : switched) result.branch_switches += static_cast<std::size_t>(s);
  const double fraction =
      static_cast<double>(result.unconverged) / static_cast<double>(grid.size());
  if (fraction > options.max_unconverged_fraction) {
    throw SolverAborted("stage fixed point failed at " + std::to_string(result.unconverged) +
                        " of " + std::to_string(grid.size()) + " grid nodes");
  }
  return result;
}

FiniteHorizonSolution backward_solve(const GameSpec& spec, std::size_t horizon,
                                     const ValueTable& terminal, const SweepOptions& options,
                                     const PolicyGrid* initial_warm) {
  if (horizon < 1) throw std::invalid_argument("backward_solve: horizon must be at least 1");
  StageGame game(spec);
  const BeliefGrid& grid = terminal.grid();
  FiniteHorizonSolution sol;
  sol.values.resize(horizon + 1);
  sol.policies.resize(horizon);
  sol.values[horizon] = terminal;
  const PolicyGrid* warm = initial_warm;
  for (std::size_t t = horizon; t-- > 0;) {
    SweepResult step = backward_step(game, grid, sol.values[t + 1], warm, options);
    sol.values[t] = std::move(step.values);
    sol.policies[t] = std::move(step.policy);
    warm = &sol.policies[t];
  }
  return sol;
}

FiniteStrategy::FiniteStrategy(GameSpec spec, std::vector<PolicyGrid> policies,
                               ProductBelief initial)
    : spec_(std::move(spec)), policies_(std::move(policies)), initial_(std::move(initial)) {}

ProductBelief FiniteStrategy::belief(std::span<const std::size_t> history) const {
  if (history.size() > horizon()) {
    throw std::out_of_range("history longer than the horizon");
  }
  ProductBelief pi = initial_;
  for (std::size_t t = 0; t < history.size(); ++t) {
    pi = update_joint(spec_, pi, policies_[t].lookup(pi), history[t]);
  }
  return pi;
}

std::vector<double> FiniteStrategy::operator()(std::span<const std::size_t> history,
                                               std::size_t agent, std::size_t own_type) const {
  if (history.size() >= horizon()) {
    throw std::out_of_range("history of length " + std::to_string(history.size()) +
                            " has no decision stage within horizon " +
                            std::to_string(horizon()));
  }
  const ProductBelief pi = belief(history);
  auto row = policies_[history.size()].lookup(pi).row(agent, own_type);
  return {row.begin(), row.end()};
}

PolicyFunction FiniteStrategy::policy_function() const {
  return [this](const ProductBelief& pi, std::size_t t) -> const Prescription& {
    if (t == 0 || t > horizon()) throw PolicyLookupError("stage outside the horizon");
    return policies_[t - 1].lookup(pi);
  };
}

FiniteStrategy finite_policy(const GameSpec& spec, std::vector<PolicyGrid> theta,
                             const ProductBelief& initial) {
  return FiniteStrategy(spec, std::move(theta), initial);
}

}  // namespace spbe
