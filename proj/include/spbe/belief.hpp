#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "spbe/game_model.hpp"

namespace spbe {

/// Below this Bayes denominator the observed action is treated as having
/// probability zero and the update falls back to the unconditional push-forward.
inline constexpr double kZeroDenominator = 1e-12;

/// Common belief as a product of per-agent marginals over own types.
struct ProductBelief {
  std::vector<std::vector<double>> marginals;

  std::size_t agents() const { return marginals.size(); }
  const std::vector<double>& operator[](std::size_t agent) const { return marginals[agent]; }
  std::vector<double>& operator[](std::size_t agent) { return marginals[agent]; }

  bool operator==(const ProductBelief&) const = default;

  /// Belief built from the initial kernel Q0.
  static ProductBelief initial(const GameSpec& spec);
};

/// Per-agent, per-own-type action distributions.
class Prescription {
 public:
  Prescription() = default;
  explicit Prescription(const GameSpec& spec);
  Prescription(std::vector<std::size_t> num_types, std::vector<std::size_t> num_actions);

  static Prescription uniform(const GameSpec& spec);

  std::size_t agents() const { return num_types_.size(); }
  std::size_t num_types(std::size_t agent) const { return num_types_[agent]; }
  std::size_t num_actions(std::size_t agent) const { return num_actions_[agent]; }

  double operator()(std::size_t agent, std::size_t type, std::size_t action) const {
    return probs_[agent][type * num_actions_[agent] + action];
  }
  double& operator()(std::size_t agent, std::size_t type, std::size_t action) {
    return probs_[agent][type * num_actions_[agent] + action];
  }

  std::span<const double> row(std::size_t agent, std::size_t type) const {
    return {probs_[agent].data() + type * num_actions_[agent], num_actions_[agent]};
  }
  std::span<double> row(std::size_t agent, std::size_t type) {
    return {probs_[agent].data() + type * num_actions_[agent], num_actions_[agent]};
  }

  /// Flattened [type][action] table of one agent.
  std::span<const double> agent_table(std::size_t agent) const { return probs_[agent]; }

  bool operator==(const Prescription&) const = default;

 private:
  std::vector<std::size_t> num_types_;
  std::vector<std::size_t> num_actions_;
  std::vector<std::vector<double>> probs_;
};

/// Sum_x pi(x) Q^i(. | x, a).
std::vector<double> push_forward(const GameSpec& spec, std::size_t agent,
                                 std::span<const double> pi, std::size_t joint_action);

/// Bayes posterior on agent i's type given its own component of the joint
/// action, pushed through Q^i; falls back to push_forward when the observed
/// action has (numerically) zero probability.
std::vector<double> update_marginal(const GameSpec& spec, std::size_t agent,
                                    std::span<const double> pi, const Prescription& gamma,
                                    std::size_t joint_action);

/// Allocation-free form used on hot paths. `out` must have |X^i| entries.
void update_marginal_into(const GameSpec& spec, std::size_t agent, std::span<const double> pi,
                          std::span<const double> gamma_table, std::size_t joint_action,
                          std::span<double> out);

/// Applies update_marginal to every agent independently.
ProductBelief update_joint(const GameSpec& spec, const ProductBelief& pi,
                           const Prescription& gamma, std::size_t joint_action);

/// Maps a public belief and the stage index (1-based) to the prescription
/// profile played there.
using PolicyFunction = std::function<const Prescription&(const ProductBelief&, std::size_t)>;

class PolicyLookupError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// pi_1, pi_2, ..., pi_{n+1} along the given joint action sequence.
std::vector<ProductBelief> forward_beliefs(const GameSpec& spec, const PolicyFunction& policy,
                                           std::span<const std::size_t> actions,
                                           const ProductBelief& initial);

/// Max deviation of any marginal sum from one, or +inf if an entry is negative
/// or not finite.
double normalization_error(const ProductBelief& pi);

}  // namespace spbe
