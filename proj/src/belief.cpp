#include "spbe/belief.hpp"

#include <cmath>
#include <limits>

namespace spbe {

ProductBelief ProductBelief::initial(const GameSpec& spec) {
  return ProductBelief{spec.initial_kernel};
}

Prescription::Prescription(const GameSpec& spec) {
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    num_types_.push_back(spec.num_types(i));
    num_actions_.push_back(spec.num_actions(i));
    probs_.emplace_back(spec.num_types(i) * spec.num_actions(i), 0.0);
  }
}

Prescription::Prescription(std::vector<std::size_t> num_types,
                           std::vector<std::size_t> num_actions)
    : num_types_(std::move(num_types)), num_actions_(std::move(num_actions)) {
  if (num_types_.size() != num_actions_.size()) {
    throw std::invalid_argument("Prescription: agent count mismatch");
  }
  for (std::size_t i = 0; i < num_types_.size(); ++i) {
    probs_.emplace_back(num_types_[i] * num_actions_[i], 0.0);
  }
}

Prescription Prescription::uniform(const GameSpec& spec) {
  Prescription p(spec);
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    const double u = 1.0 / static_cast<double>(spec.num_actions(i));
    for (std::size_t x = 0; x < spec.num_types(i); ++x) {
      for (double& v : p.row(i, x)) v = u;
    }
  }
  return p;
}

std::vector<double> push_forward(const GameSpec& spec, std::size_t agent,
                                 std::span<const double> pi, std::size_t joint_action) {
  const std::size_t nt = spec.num_types(agent);
  const std::size_t n_joint = spec.joint_action_count();
  const double* q = spec.transition[agent].data();
  std::vector<double> out(nt, 0.0);
  for (std::size_t x = 0; x < nt; ++x) {
    if (pi[x] == 0.0) continue;
    const double* row = q + (x * n_joint + joint_action) * nt;
    for (std::size_t xn = 0; xn < nt; ++xn) out[xn] += pi[x] * row[xn];
  }
  return out;
}

void update_marginal_into(const GameSpec& spec, std::size_t agent, std::span<const double> pi,
                          std::span<const double> gamma_table, std::size_t joint_action,
                          std::span<double> out) {
  const std::size_t nt = spec.num_types(agent);
  const std::size_t na = spec.num_actions(agent);
  const std::size_t n_joint = spec.joint_action_count();

  // Own component of the joint action (agent 0 slowest).
  std::size_t stride = 1;
  for (std::size_t j = spec.agents(); j-- > agent + 1;) stride *= spec.num_actions(j);
  const std::size_t own_action = (joint_action / stride) % na;

  double den = 0.0;
  for (std::size_t x = 0; x < nt; ++x) den += pi[x] * gamma_table[x * na + own_action];

  const double* q = spec.transition[agent].data();
  for (std::size_t xn = 0; xn < nt; ++xn) out[xn] = 0.0;
  const bool bayes = den > kZeroDenominator;
  for (std::size_t x = 0; x < nt; ++x) {
    const double w = bayes ? pi[x] * gamma_table[x * na + own_action] : pi[x];
    if (w == 0.0) continue;
    const double* row = q + (x * n_joint + joint_action) * nt;
    for (std::size_t xn = 0; xn < nt; ++xn) out[xn] += w * row[xn];
  }
  if (bayes) {
    for (std::size_t xn = 0; xn < nt; ++xn) out[xn] /= den;
  }
}

std::vector<double> update_marginal(const GameSpec& spec, std::size_t agent,
                                    std::span<const double> pi, const Prescription& gamma,
                                    std::size_t joint_action) {
  std::vector<double> out(spec.num_types(agent));
  update_marginal_into(spec, agent, pi, gamma.agent_table(agent), joint_action, out);
  return out;
}

ProductBelief update_joint(const GameSpec& spec, const ProductBelief& pi,
                           const Prescription& gamma, std::size_t joint_action) {
  ProductBelief next;
  next.marginals.reserve(spec.agents());
  for (std::size_t j = 0; j < spec.agents(); ++j) {
    next.marginals.push_back(update_marginal(spec, j, pi[j], gamma, joint_action));
  }
  return next;
}

std::vector<ProductBelief> forward_beliefs(const GameSpec& spec, const PolicyFunction& policy,
                                           std::span<const std::size_t> actions,
                                           const ProductBelief& initial) {
  std::vector<ProductBelief> out;
  out.reserve(actions.size() + 1);
  out.push_back(initial);
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const Prescription& gamma = policy(out.back(), t + 1);
    out.push_back(update_joint(spec, out.back(), gamma, actions[t]));
  }
  return out;
}

double normalization_error(const ProductBelief& pi) {
  double worst = 0.0;
  for (const auto& m : pi.marginals) {
    double sum = 0.0;
    for (double v : m) {
      if (!std::isfinite(v) || v < 0.0) return std::numeric_limits<double>::infinity();
      sum += v;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

}  // namespace spbe
