#include "spbe/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spbe/parallel.hpp"
#include "spbe/random.hpp"

namespace spbe {

StrategyEvaluator equilibrium_strategy() {
  return [](const StrategyContext& ctx, std::span<double> out) {
    auto row = ctx.equilibrium.row(ctx.agent, ctx.own_type);
    std::copy(row.begin(), row.end(), out.begin());
  };
}

StrategyEvaluator one_step_deviation(std::size_t action) {
  return [action](const StrategyContext& ctx, std::span<double> out) {
    if (ctx.t == 1) {
      std::fill(out.begin(), out.end(), 0.0);
      out[action] = 1.0;
      return;
    }
    auto row = ctx.equilibrium.row(ctx.agent, ctx.own_type);
    std::copy(row.begin(), row.end(), out.begin());
  };
}

StrategyEvaluator constant_action(std::size_t action) {
  return [action](const StrategyContext&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    out[action] = 1.0;
  };
}

StrategyEvaluator uniform_random() {
  return [](const StrategyContext&, std::span<double> out) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
  };
}

StrategyEvaluator myopic_greedy(const GameSpec& spec) {
  const JointIndex types = spec.type_index();
  const JointIndex actions = spec.action_index();
  return [spec, types, actions](const StrategyContext& ctx, std::span<double> out) {
    const std::size_t n = spec.agents();
    std::vector<double> expected(out.size(), 0.0);
    for (std::size_t x = 0; x < types.size(); ++x) {
      if (types.component(x, ctx.agent) != ctx.own_type) continue;
      double px = 1.0;
      for (std::size_t j = 0; j < n && px > 0.0; ++j) {
        if (j != ctx.agent) px *= ctx.belief[j][types.component(x, j)];
      }
      if (px == 0.0) continue;
      for (std::size_t a = 0; a < actions.size(); ++a) {
        double pa = px;
        for (std::size_t j = 0; j < n && pa > 0.0; ++j) {
          if (j != ctx.agent) pa *= ctx.equilibrium(j, types.component(x, j), actions.component(a, j));
        }
        if (pa == 0.0) continue;
        expected[actions.component(a, ctx.agent)] += pa * spec.reward_at(ctx.agent, x, a);
      }
    }
    const auto best = std::max_element(expected.begin(), expected.end()) - expected.begin();
    std::fill(out.begin(), out.end(), 0.0);
    out[static_cast<std::size_t>(best)] = 1.0;
  };
}

std::vector<NamedStrategy> deviation_library(const GameSpec& spec, std::size_t agent) {
  std::vector<NamedStrategy> lib;
  for (std::size_t a = 0; a < spec.num_actions(agent); ++a) {
    lib.push_back({"one_step:" + spec.action_labels[agent][a], one_step_deviation(a)});
  }
  for (std::size_t a = 0; a < spec.num_actions(agent); ++a) {
    lib.push_back({"always:" + spec.action_labels[agent][a], constant_action(a)});
  }
  lib.push_back({"uniform_random", uniform_random()});
  lib.push_back({"myopic_greedy", myopic_greedy(spec)});
  return lib;
}

namespace {

class ExactEnumerator {
 public:
  ExactEnumerator(const GameSpec& spec, const PolicyFunction& equilibrium,
                  const StrategyEvaluator& strategy, const StrategyEvaluator& others,
                  std::size_t agent, std::size_t horizon, const ValueFunction* terminal)
      : spec_(spec),
        equilibrium_(equilibrium),
        strategy_(strategy),
        others_(others),
        agent_(agent),
        horizon_(horizon),
        terminal_(terminal),
        types_(spec.type_index()),
        actions_(spec.action_index()) {}

  double value(std::size_t t, const ProductBelief& pi, std::vector<std::size_t>& x,
               std::vector<std::size_t>& history) {
    const std::size_t n = spec_.agents();
    if (t > horizon_) {
      if (terminal_ == nullptr) return 0.0;
      std::vector<double> v(slot_count());
      terminal_->evaluate(pi, v);
      return v[slot(agent_, x[agent_])];
    }
    const Prescription gamma = equilibrium_(pi, t);
    std::vector<std::vector<double>> dist(n);
    for (std::size_t j = 0; j < n; ++j) {
      dist[j].assign(spec_.num_actions(j), 0.0);
      StrategyContext ctx{t, j, x[j], pi, history, gamma};
      (j == agent_ ? strategy_ : others_)(ctx, dist[j]);
    }
    const std::size_t xf = types_.flatten(x);
    double total = 0.0;
    for (std::size_t a = 0; a < actions_.size(); ++a) {
      double pa = 1.0;
      for (std::size_t j = 0; j < n && pa > 0.0; ++j) pa *= dist[j][actions_.component(a, j)];
      if (pa == 0.0) continue;
      const ProductBelief next = update_joint(spec_, pi, gamma, a);
      history.push_back(a);
      double cont = 0.0;
      if (spec_.discount > 0.0) {
        for (std::size_t y = 0; y < types_.size(); ++y) {
          double q = 1.0;
          for (std::size_t j = 0; j < n && q > 0.0; ++j) {
            q *= spec_.transition_prob(j, x[j], a, types_.component(y, j));
          }
          if (q == 0.0) continue;
          std::vector<std::size_t> xn = types_.unflatten(y);
          cont += q * value(t + 1, next, xn, history);
        }
      }
      history.pop_back();
      total += pa * (spec_.reward_at(agent_, xf, a) + spec_.discount * cont);
    }
    return total;
  }

 private:
  std::size_t slot_count() const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < spec_.agents(); ++j) s += spec_.num_types(j);
    return s;
  }
  std::size_t slot(std::size_t agent, std::size_t type) const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < agent; ++j) s += spec_.num_types(j);
    return s + type;
  }

  const GameSpec& spec_;
  const PolicyFunction& equilibrium_;
  const StrategyEvaluator& strategy_;
  const StrategyEvaluator& others_;
  std::size_t agent_;
  std::size_t horizon_;
  const ValueFunction* terminal_;
  JointIndex types_;
  JointIndex actions_;
};

std::size_t slot_of(const GameSpec& spec, std::size_t agent, std::size_t type) {
  std::size_t s = 0;
  for (std::size_t j = 0; j < agent; ++j) s += spec.num_types(j);
  return s + type;
}

std::size_t slot_total(const GameSpec& spec) {
  return slot_of(spec, spec.agents() - 1, spec.num_types(spec.agents() - 1));
}

}  // namespace

double reward_to_go_exact(const GameSpec& spec, const PolicyFunction& equilibrium,
                          const StrategyEvaluator& strategy, const StrategyEvaluator& others,
                          std::size_t agent, const ProductBelief& pi, std::size_t own_type,
                          std::size_t horizon, const ValueFunction* terminal,
                          double node_cap) {
  const JointIndex types = spec.type_index();
  const double branching =
      static_cast<double>(spec.joint_type_count()) * static_cast<double>(spec.joint_action_count());
  const double nodes = static_cast<double>(types.size() / spec.num_types(agent)) *
                       std::pow(branching, static_cast<double>(horizon));
  if (nodes > node_cap) {
    throw EnumerationTooLarge("enumeration tree of about " + std::to_string(nodes) +
                              " nodes exceeds the cap; use the Monte Carlo estimator");
  }
  ExactEnumerator walk(spec, equilibrium, strategy, others, agent, horizon, terminal);
  std::vector<std::size_t> history;
  double total = 0.0;
  for (std::size_t x = 0; x < types.size(); ++x) {
    if (types.component(x, agent) != own_type) continue;
    double px = 1.0;
    for (std::size_t j = 0; j < spec.agents(); ++j) {
      if (j != agent) px *= pi[j][types.component(x, j)];
    }
    if (px == 0.0) continue;
    std::vector<std::size_t> comps = types.unflatten(x);
    total += px * walk.value(1, pi, comps, history);
  }
  return total;
}

double tail_bound(const GameSpec& spec, double v_max, std::size_t horizon) {
  const double delta = spec.discount;
  if (delta == 0.0) return 0.0;
  const double scale = 1.0 - delta;
  return scale * std::pow(delta, static_cast<double>(horizon)) *
         (spec.max_abs_reward() / scale + v_max);
}

std::size_t auto_horizon(const GameSpec& spec, double v_max, double eps_dev) {
  std::size_t t = 1;
  while (tail_bound(spec, v_max, t) > eps_dev / 10.0 && t < 100000) ++t;
  return t;
}

MonteCarloEstimate reward_to_go_mc(const GameSpec& spec, const PolicyFunction& equilibrium,
                                   const StrategyEvaluator& strategy, std::size_t agent,
                                   const ProductBelief& pi, std::size_t own_type,
                                   std::size_t horizon, const ValueFunction* terminal,
                                   std::size_t samples, std::uint64_t seed,
                                   std::uint64_t stream_id, std::size_t threads) {
  if (samples == 0) throw std::invalid_argument("reward_to_go_mc: samples must be positive");
  const std::size_t n = spec.agents();
  const JointIndex types = spec.type_index();
  const JointIndex actions = spec.action_index();
  const StrategyEvaluator eq = equilibrium_strategy();
  std::vector<double> draws(samples, 0.0);

  parallel_for(samples, threads, [&](std::size_t s) {
    std::mt19937_64 rng = stream(seed, stream_id, s);
    std::vector<std::size_t> x(n);
    for (std::size_t j = 0; j < n; ++j) x[j] = j == agent ? own_type : sample_index(pi[j], rng);
    ProductBelief cur = pi;
    ProductBelief next = pi;
    std::vector<std::size_t> history;
    history.reserve(horizon);
    std::vector<std::vector<double>> dist(n);
    for (std::size_t j = 0; j < n; ++j) dist[j].assign(spec.num_actions(j), 0.0);
    std::vector<std::size_t> a_comp(n);
    std::vector<double> q;
    double total = 0.0;
    double weight = 1.0;
    for (std::size_t t = 1; t <= horizon; ++t) {
      const Prescription& gamma = equilibrium(cur, t);
      for (std::size_t j = 0; j < n; ++j) {
        StrategyContext ctx{t, j, x[j], cur, history, gamma};
        (j == agent ? strategy : eq)(ctx, dist[j]);
        a_comp[j] = sample_index(dist[j], rng);
      }
      const std::size_t a = actions.flatten(a_comp);
      total += weight * spec.reward_at(agent, types.flatten(x), a);
      for (std::size_t j = 0; j < n; ++j) {
        update_marginal_into(spec, j, cur[j], gamma.agent_table(j), a, next[j]);
        q.resize(spec.num_types(j));
        for (std::size_t y = 0; y < q.size(); ++y) q[y] = spec.transition_prob(j, x[j], a, y);
        x[j] = sample_index(q, rng);
      }
      std::swap(cur, next);
      history.push_back(a);
      weight *= spec.discount;
    }
    if (terminal != nullptr && weight > 0.0) {
      std::vector<double> v(slot_total(spec));
      terminal->evaluate(cur, v);
      total += weight * v[slot_of(spec, agent, x[agent])];
    }
    draws[s] = total;
  });

  MonteCarloEstimate est;
  for (double d : draws) est.mean += d;
  est.mean /= static_cast<double>(samples);
  if (samples > 1) {
    double ss = 0.0;
    for (double d : draws) ss += (d - est.mean) * (d - est.mean);
    est.standard_error = std::sqrt(ss / static_cast<double>(samples - 1) / static_cast<double>(samples));
  }
  return est;
}

DeviationEntry deviation_gap_mc(const GameSpec& spec, const ValueTable& values,
                                const PolicyGrid& theta, std::size_t agent,
                                const ProductBelief& pi, std::size_t own_type,
                                const NamedStrategy& deviation, const DeviationConfig& config,
                                std::uint64_t stream_id) {
  const double scale = 1.0 - spec.discount;
  const double v_max = values.max_abs();
  DeviationEntry e;
  e.agent = agent;
  e.own_type = own_type;
  e.belief = pi;
  e.deviation = deviation.name;
  e.horizon = config.horizon > 0 ? config.horizon : auto_horizon(spec, v_max, config.eps_dev);
  e.samples = config.samples;
  const PolicyFunction policy = theta.as_function();
  const MonteCarloEstimate est =
      reward_to_go_mc(spec, policy, deviation.strategy, agent, pi, own_type, e.horizon, &values,
                      config.samples, config.seed, stream_id, config.threads);
  e.reward_to_go = est.mean;
  e.value = values.interpolate(pi, agent, own_type);
  e.gap = scale * (e.reward_to_go - e.value);
  e.standard_error = scale * est.standard_error;
  e.tail = tail_bound(spec, v_max, e.horizon);
  e.pass = e.gap <= config.eps_dev + e.tail + 3.0 * e.standard_error;
  return e;
}

Lemma4Result lemma4_check(const GameSpec& spec, const ValueTable& values, std::size_t horizon,
                          const SweepOptions& options, const PolicyGrid* theta) {
  const FiniteHorizonSolution sol = backward_solve(spec, horizon, values, options, theta);
  Lemma4Result r;
  for (std::size_t t = 0; t < horizon; ++t) {
    const double d = sol.values[t].max_abs_difference(values);
    r.per_stage.push_back(d);
    r.discrepancy = std::isnan(d) ? d : std::max(r.discrepancy, d);
  }
  r.normalized = (1.0 - spec.discount) * r.discrepancy;
  return r;
}

std::vector<SamplePoint> sample_points(const GameSpec& spec, const BeliefGrid& grid,
                                       std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> feasible;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    if (grid.feasible(node)) feasible.push_back(node);
  }
  std::mt19937_64 rng = stream(seed, 0x5eed);
  std::vector<SamplePoint> points;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t agent = rng() % spec.agents();
    const std::size_t node = feasible[rng() % feasible.size()];
    const std::size_t type = rng() % spec.num_types(agent);
    points.push_back({agent, node, type});
  }
  return points;
}

std::vector<DeviationEntry> deviation_suite(const GameSpec& spec, const ValueTable& values,
                                            const PolicyGrid& theta,
                                            const std::vector<SamplePoint>& points,
                                            const DeviationConfig& config) {
  std::vector<DeviationEntry> out;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const SamplePoint& p = points[k];
    const ProductBelief pi = values.grid().belief_at(p.node);
    const auto lib = deviation_library(spec, p.agent);
    for (std::size_t d = 0; d < lib.size(); ++d) {
      out.push_back(
          deviation_gap_mc(spec, values, theta, p.agent, pi, p.own_type, lib[d], config, k * 64 + d));
    }
  }
  return out;
}

VerificationReport verify_solution(const GameSpec& spec, const ValueTable& values,
                                   const PolicyGrid& theta, const SuiteConfig& config) {
  const double scale = 1.0 - spec.discount;
  VerificationReport r;
  r.residual = residual(spec, values, theta, config.sweep.threads);
  r.normalized_residual = scale * r.residual.total();
  r.interpolation_slack = scale * r.residual.bellman;
  r.residual_pass = r.normalized_residual <= config.tol_residual;
  r.lemma4 = lemma4_check(spec, values, config.lemma4_horizon, config.sweep, &theta);
  r.lemma4_tolerance = config.tol_value + 10.0 * r.interpolation_slack;
  r.lemma4_pass = r.lemma4.normalized <= r.lemma4_tolerance;
  const auto points = sample_points(spec, values.grid(), config.points, config.deviation.seed);
  r.deviations = deviation_suite(spec, values, theta, points, config.deviation);
  r.deviations_pass = std::all_of(r.deviations.begin(), r.deviations.end(),
                                  [](const DeviationEntry& e) { return e.pass; });
  return r;
}

nlohmann::json to_json(const DeviationEntry& e) {
  return {{"agent", e.agent},
          {"own_type", e.own_type},
          {"belief", e.belief.marginals},
          {"deviation", e.deviation},
          {"reward_to_go", e.reward_to_go},
          {"value", e.value},
          {"gap", e.gap},
          {"standard_error", e.standard_error},
          {"tail_bound", e.tail},
          {"horizon", e.horizon},
          {"samples", e.samples},
          {"pass", e.pass}};
}

nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json devs = nlohmann::json::array();
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& e : r.deviations) {
    devs.push_back(to_json(e));
    worst = std::max(worst, e.gap - e.tail - 3.0 * e.standard_error);
  }
  return {{"passed", r.passed()},
          {"residual",
           {{"bellman", r.residual.bellman},
            {"best_response_gap", r.residual.best_response_gap},
            {"normalized", r.normalized_residual},
            {"pass", r.residual_pass}}},
          {"interpolation_slack", r.interpolation_slack},
          {"lemma4",
           {{"discrepancy", r.lemma4.discrepancy},
            {"normalized", r.lemma4.normalized},
            {"per_stage", r.lemma4.per_stage},
            {"tolerance", r.lemma4_tolerance},
            {"pass", r.lemma4_pass}}},
          {"deviations",
           {{"pass", r.deviations_pass},
            {"count", r.deviations.size()},
            {"worst_excess_gap", r.deviations.empty() ? 0.0 : worst},
            {"entries", devs}}}};
}

}  // namespace spbe
