#include "spbe/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "spbe/parallel.hpp"
#include "spbe/random.hpp"

namespace spbe {

Trajectory sample_trajectory(const GameSpec& spec, const PolicyGrid& theta,
                             const ProductBelief& pi_1,
                             const std::optional<std::vector<std::size_t>>& types,
                             std::size_t horizon, std::uint64_t seed, std::uint64_t stream_id) {
  if (horizon < 1) throw std::invalid_argument("sample_trajectory: horizon must be at least 1");
  const std::size_t n = spec.agents();
  const JointIndex type_index = spec.type_index();
  const JointIndex action_index = spec.action_index();
  std::mt19937_64 rng = stream(seed, stream_id);

  std::vector<std::size_t> x(n);
  if (types) {
    if (types->size() != n) throw std::invalid_argument("sample_trajectory: wrong type count");
    x = *types;
  } else {
    for (std::size_t j = 0; j < n; ++j) x[j] = sample_index(spec.initial_kernel[j], rng);
  }

  Trajectory tr;
  tr.seed = seed;
  tr.policy_id = "theta@h=" + std::to_string(theta.grid().step());
  ProductBelief pi = pi_1;
  std::vector<double> q;
  for (std::size_t t = 1; t <= horizon; ++t) {
    const Prescription& gamma = theta.lookup(pi);
    TrajectoryStep step;
    step.types = x;
    step.belief = pi;
    step.actions.resize(n);
    for (std::size_t j = 0; j < n; ++j) step.actions[j] = sample_index(gamma.row(j, x[j]), rng);
    const std::size_t a = action_index.flatten(step.actions);
    const std::size_t xf = type_index.flatten(x);
    for (std::size_t j = 0; j < n; ++j) step.rewards.push_back(spec.reward_at(j, xf, a));
    pi = update_joint(spec, pi, gamma, a);
    for (std::size_t j = 0; j < n; ++j) {
      q.resize(spec.num_types(j));
      for (std::size_t y = 0; y < q.size(); ++y) q[y] = spec.transition_prob(j, x[j], a, y);
      x[j] = sample_index(q, rng);
    }
    tr.steps.push_back(std::move(step));
  }
  tr.final_belief = std::move(pi);
  return tr;
}

void write_trajectory_csv(const GameSpec& spec, const Trajectory& tr, std::ostream& out) {
  const std::size_t n = spec.agents();
  out << "t";
  for (std::size_t j = 0; j < n; ++j) out << ",x" << j + 1;
  for (std::size_t j = 0; j < n; ++j) out << ",a" << j + 1;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t y = 0; y + 1 < spec.num_types(j); ++y) {
      out << ",pi" << j + 1 << "_" << spec.type_labels[j][y];
    }
  }
  for (std::size_t j = 0; j < n; ++j) out << ",r" << j + 1;
  out << "\n";
  char buf[64];
  for (std::size_t t = 0; t < tr.steps.size(); ++t) {
    const TrajectoryStep& s = tr.steps[t];
    out << t + 1;
    for (std::size_t j = 0; j < n; ++j) out << "," << spec.type_labels[j][s.types[j]];
    for (std::size_t j = 0; j < n; ++j) out << "," << spec.action_labels[j][s.actions[j]];
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t y = 0; y + 1 < spec.num_types(j); ++y) {
        std::snprintf(buf, sizeof buf, "%.17g", s.belief[j][y]);
        out << "," << buf;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", s.rewards[j]);
      out << "," << buf;
    }
    out << "\n";
  }
}

namespace {

bool concentrated(const ProductBelief& pi, const std::vector<std::size_t>& types, double threshold) {
  for (std::size_t j = 0; j < pi.agents(); ++j) {
    if (pi[j][types[j]] < threshold) return false;
  }
  return true;
}

double median(std::vector<std::size_t> times) {
  if (times.empty()) return INFINITY;
  std::sort(times.begin(), times.end());
  const std::size_t m = times.size();
  auto as_double = [](std::size_t v) { return v == kNever ? INFINITY : static_cast<double>(v); };
  if (m % 2 == 1) return as_double(times[m / 2]);
  const double lo = as_double(times[m / 2 - 1]);
  const double hi = as_double(times[m / 2]);
  return std::isinf(hi) ? hi : 0.5 * (lo + hi);
}

}  // namespace

std::size_t time_to_concentration(const Trajectory& tr, double threshold) {
  for (std::size_t t = 0; t < tr.steps.size(); ++t) {
    if (concentrated(tr.steps[t].belief, tr.steps[t].types, threshold)) return t + 1;
  }
  // The final belief concerns the types drawn after the last stage; with static
  // types these equal the last stage's types.
  if (!tr.steps.empty()) {
    const TrajectoryStep& last = tr.steps.back();
    if (concentrated(tr.final_belief, last.types, threshold)) return tr.steps.size() + 1;
  }
  return kNever;
}

double LearningStats::fraction_within(std::size_t t) const {
  if (outcomes.empty()) return 0.0;
  std::size_t k = 0;
  for (const auto& o : outcomes) k += o.time_to_concentration <= t;
  return static_cast<double>(k) / static_cast<double>(outcomes.size());
}

LearningStats markov_chain_ensemble(const GameSpec& spec, const PolicyGrid& theta,
                                    const std::vector<ProductBelief>& initial_beliefs,
                                    std::size_t n_seeds, std::size_t horizon, double threshold,
                                    std::uint64_t seed, std::size_t threads) {
  if (initial_beliefs.empty() || n_seeds == 0) {
    throw std::invalid_argument("markov_chain_ensemble: need initial beliefs and seeds");
  }
  const std::size_t n = spec.agents();
  LearningStats stats;
  stats.threshold = threshold;
  stats.horizon = horizon;
  stats.runs = initial_beliefs.size() * n_seeds;
  stats.outcomes.resize(stats.runs);

  parallel_for(stats.runs, threads, [&](std::size_t k) {
    const std::size_t init = k / n_seeds;
    const std::size_t s = k % n_seeds;
    const Trajectory tr =
        sample_trajectory(spec, theta, initial_beliefs[init], std::nullopt, horizon, seed,
                          (static_cast<std::uint64_t>(init) << 32) | s);
    RunOutcome& o = stats.outcomes[k];
    o.initial = init;
    o.seed_index = s;
    o.types = tr.steps.front().types;
    o.time_to_concentration = time_to_concentration(tr, threshold);
    o.terminal_accuracy = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      o.terminal_accuracy = std::min(o.terminal_accuracy, tr.final_belief[j][tr.steps.back().types[j]]);
    }
    o.discounted_reward.assign(n, 0.0);
    double w = 1.0;
    for (const auto& step : tr.steps) {
      for (std::size_t j = 0; j < n; ++j) o.discounted_reward[j] += w * step.rewards[j];
      w *= spec.discount;
    }
  });

  std::vector<std::size_t> all_times;
  stats.mean_discounted_reward.assign(n, 0.0);
  stats.discounted_reward_se.assign(n, 0.0);
  for (const auto& o : stats.outcomes) {
    all_times.push_back(o.time_to_concentration);
    stats.concentrated += o.time_to_concentration != kNever;
    for (std::size_t j = 0; j < n; ++j) stats.mean_discounted_reward[j] += o.discounted_reward[j];
  }
  const double runs = static_cast<double>(stats.runs);
  for (std::size_t j = 0; j < n; ++j) {
    stats.mean_discounted_reward[j] /= runs;
    double ss = 0.0;
    for (const auto& o : stats.outcomes) {
      const double d = o.discounted_reward[j] - stats.mean_discounted_reward[j];
      ss += d * d;
    }
    stats.discounted_reward_se[j] = stats.runs > 1 ? std::sqrt(ss / (runs - 1.0) / runs) : 0.0;
  }
  stats.median_time = median(all_times);

  for (std::size_t init = 0; init < initial_beliefs.size(); ++init) {
    InitialStats is;
    is.belief = initial_beliefs[init];
    std::vector<std::size_t> times;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const RunOutcome& o = stats.outcomes[init * n_seeds + s];
      times.push_back(o.time_to_concentration);
      is.concentrated += o.time_to_concentration != kNever;
      is.mean_terminal_accuracy += o.terminal_accuracy;
    }
    is.runs = n_seeds;
    is.mean_terminal_accuracy /= static_cast<double>(n_seeds);
    is.median_time = median(times);
    stats.per_initial.push_back(std::move(is));
  }
  return stats;
}

std::vector<ProductBelief> belief_lattice(const GameSpec& spec, std::size_t k) {
  if (spec.agents() != 2 || spec.num_types(0) != 2 || spec.num_types(1) != 2) {
    throw std::invalid_argument("belief_lattice: needs two agents with two types each");
  }
  std::vector<ProductBelief> out;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double p1 = (static_cast<double>(i) + 0.5) / static_cast<double>(k);
      const double p2 = (static_cast<double>(j) + 0.5) / static_cast<double>(k);
      out.push_back(ProductBelief{{{p1, 1.0 - p1}, {p2, 1.0 - p2}}});
    }
  }
  return out;
}

std::pair<double, double> coordination_benchmarks(double x) {
  const double full = 1.0 - x / 2.0;
  return {full, full * full};
}

nlohmann::json to_json(const LearningStats& s, bool include_runs) {
  auto finite_or_null = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  nlohmann::json per = nlohmann::json::array();
  for (const auto& is : s.per_initial) {
    per.push_back({{"belief", is.belief.marginals},
                   {"runs", is.runs},
                   {"concentrated", is.concentrated},
                   {"median_time_to_concentration", finite_or_null(is.median_time)},
                   {"mean_terminal_accuracy", is.mean_terminal_accuracy}});
  }
  nlohmann::json j = {{"threshold", s.threshold},
                      {"horizon", s.horizon},
                      {"runs", s.runs},
                      {"concentrated", s.concentrated},
                      {"median_time_to_concentration", finite_or_null(s.median_time)},
                      {"fraction_within_10", s.fraction_within(10)},
                      {"mean_discounted_reward", s.mean_discounted_reward},
                      {"discounted_reward_se", s.discounted_reward_se},
                      {"per_initial", per}};
  if (include_runs) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& o : s.outcomes) {
      runs.push_back({{"initial", o.initial},
                      {"seed_index", o.seed_index},
                      {"types", o.types},
                      {"time_to_concentration",
                       o.time_to_concentration == kNever ? nlohmann::json(nullptr)
                                                         : nlohmann::json(o.time_to_concentration)},
                      {"terminal_accuracy", o.terminal_accuracy},
                      {"discounted_reward", o.discounted_reward}});
    }
    j["outcomes"] = runs;
  }
  return j;
}

}  // namespace spbe
