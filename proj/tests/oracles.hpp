#pragma once

// Reference computations written without the library's solver code paths.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "spbe/belief.hpp"
#include "spbe/belief_grid.hpp"
#include "spbe/game_model.hpp"

namespace oracle {

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& v : p) {
    v = u(rng) < zero_prob ? 0.0 : -std::log(1.0 - u(rng));
    sum += v;
  }
  if (sum == 0.0) {
    p.assign(n, 0.0);
    p[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= sum;
  return p;
}

/// Random game with the given type and action counts; rewards in [-1, 1].
inline spbe::GameSpec random_game(std::mt19937_64& rng, const std::vector<std::size_t>& types,
                                  const std::vector<std::size_t>& actions, double delta,
                                  double zero_prob = 0.0) {
  spbe::GameSpec g;
  const std::size_t n = types.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> tl, al;
    for (std::size_t x = 0; x < types[i]; ++x) tl.push_back("t" + std::to_string(x));
    for (std::size_t a = 0; a < actions[i]; ++a) al.push_back("a" + std::to_string(a));
    g.type_labels.push_back(tl);
    g.action_labels.push_back(al);
  }
  std::size_t joint_types = 1, joint_actions = 1;
  for (std::size_t i = 0; i < n; ++i) {
    joint_types *= types[i];
    joint_actions *= actions[i];
  }
  std::uniform_real_distribution<double> r(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    g.initial_kernel.push_back(random_simplex(rng, types[i]));
    std::vector<double> q;
    for (std::size_t k = 0; k < types[i] * joint_actions; ++k) {
      auto row = random_simplex(rng, types[i], zero_prob);
      q.insert(q.end(), row.begin(), row.end());
    }
    g.transition.push_back(q);
    std::vector<double> rew(joint_types * joint_actions);
    for (auto& v : rew) v = r(rng);
    g.reward.push_back(rew);
  }
  g.discount = delta;
  return g;
}

/// Posterior on agent i's next type from the full joint distribution over all
/// agents' types and actions.
inline std::vector<double> brute_force_update(const spbe::GameSpec& g, std::size_t agent,
                                              const spbe::ProductBelief& pi,
                                              const spbe::Prescription& gamma,
                                              std::size_t joint_action) {
  const std::size_t n = g.agents();
  std::vector<std::size_t> a(n);
  {
    std::size_t rest = joint_action;
    for (std::size_t j = n; j-- > 0;) {
      a[j] = rest % g.num_actions(j);
      rest /= g.num_actions(j);
    }
  }
  std::size_t joint_types = 1;
  for (std::size_t j = 0; j < n; ++j) joint_types *= g.num_types(j);

  // Probability of the other agents' actions; when it is zero the joint is
  // conditioned on agent i's action alone.
  double others = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == agent) continue;
    double pj = 0.0;
    for (std::size_t y = 0; y < g.num_types(j); ++y) pj += pi[j][y] * gamma(j, y, a[j]);
    others *= pj;
  }
  const std::size_t nt = g.num_types(agent);
  std::vector<double> post(nt, 0.0);
  double evidence = 0.0;
  std::vector<std::size_t> x(n);
  for (std::size_t flat = 0; flat < joint_types; ++flat) {
    std::size_t rest = flat;
    for (std::size_t j = n; j-- > 0;) {
      x[j] = rest % g.num_types(j);
      rest /= g.num_types(j);
    }
    double p = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      p *= pi[j][x[j]];
      if (j == agent || others > 0.0) p *= gamma(j, x[j], a[j]);
    }
    evidence += p;
    for (std::size_t y = 0; y < nt; ++y) {
      post[y] += p * g.transition_prob(agent, x[agent], joint_action, y);
    }
  }
  const double own = others > 0.0 ? evidence / others : evidence;
  if (own <= spbe::kZeroDenominator) {
    std::fill(post.begin(), post.end(), 0.0);
    for (std::size_t x0 = 0; x0 < nt; ++x0) {
      for (std::size_t y = 0; y < nt; ++y) {
        post[y] += pi[agent][x0] * g.transition_prob(agent, x0, joint_action, y);
      }
    }
    return post;
  }
  for (auto& v : post) v /= evidence;
  return post;
}

/// q^i(a | x) by enumerating the other agents' types and actions, with the
/// continuation read from `v` at the brute-force posterior.
inline std::vector<double> q_values(const spbe::GameSpec& g, const spbe::ProductBelief& pi,
                                    const spbe::Prescription& gamma, const spbe::ValueFunction& v,
                                    std::size_t agent, std::size_t own_type) {
  const std::size_t n = g.agents();
  std::size_t joint_types = 1, joint_actions = 1, slots = 0, slot = 0;
  for (std::size_t j = 0; j < n; ++j) {
    joint_types *= g.num_types(j);
    joint_actions *= g.num_actions(j);
    if (j < agent) slot += g.num_types(j);
    slots += g.num_types(j);
  }
  std::vector<double> q(g.num_actions(agent), 0.0);
  std::vector<double> cont(slots);
  std::vector<std::size_t> x(n), a(n);
  for (std::size_t fa = 0; fa < joint_actions; ++fa) {
    std::size_t rest = fa;
    for (std::size_t j = n; j-- > 0;) {
      a[j] = rest % g.num_actions(j);
      rest /= g.num_actions(j);
    }
    spbe::ProductBelief next = pi;
    for (std::size_t j = 0; j < n; ++j) next[j] = brute_force_update(g, j, pi, gamma, fa);
    v.evaluate(next, cont);
    for (std::size_t fx = 0; fx < joint_types; ++fx) {
      rest = fx;
      for (std::size_t j = n; j-- > 0;) {
        x[j] = rest % g.num_types(j);
        rest /= g.num_types(j);
      }
      if (x[agent] != own_type) continue;
      double w = 1.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == agent) continue;
        w *= pi[j][x[j]] * gamma(j, x[j], a[j]);
      }
      if (w == 0.0) continue;
      double future = 0.0;
      for (std::size_t y = 0; y < g.num_types(agent); ++y) {
        future += g.transition_prob(agent, own_type, fa, y) * cont[slot + y];
      }
      q[a[agent]] += w * (g.reward_at(agent, fx, fa) + g.discount * future);
    }
  }
  return q;
}

/// Largest best-response gap of gamma under the brute-force q-values.
inline double equilibrium_gap(const spbe::GameSpec& g, const spbe::ProductBelief& pi,
                              const spbe::Prescription& gamma, const spbe::ValueFunction& v) {
  double worst = 0.0;
  for (std::size_t i = 0; i < g.agents(); ++i) {
    for (std::size_t x = 0; x < g.num_types(i); ++x) {
      const auto q = q_values(g, pi, gamma, v, i, x);
      double best = q[0], played = 0.0;
      for (std::size_t b = 0; b < q.size(); ++b) {
        best = std::max(best, q[b]);
        played += gamma(i, x, b) * q[b];
      }
      worst = std::max(worst, best - played);
    }
  }
  return worst;
}

/// One-shot Bayesian Nash equilibrium of the public goods game with cost
/// x_high >= 1 > x_low: H never contributes, and L of agent i contributes with
/// probability g_i. Among all equilibria the least asymmetric (smallest
/// |g1 - g2|) is returned, ties going to the larger g1 + g2.
struct PublicGoodsBne {
  double g1 = 0.0;
  double g2 = 0.0;
};

inline PublicGoodsBne public_goods_bne(double pi1_high, double pi2_high, double x_low) {
  const double p_low[2] = {1.0 - pi1_high, 1.0 - pi2_high};
  const double gain = 1.0 - x_low;
  const double tol = 1e-12;
  // Agent i's L prefers to contribute iff gain > p_low[j] * g_j.
  auto consistent = [&](std::size_t i, double gi, double gj) {
    const double other = p_low[1 - i] * gj;
    if (gi <= tol) return other >= gain - tol;
    if (gi >= 1.0 - tol) return other <= gain + tol;
    return std::abs(other - gain) <= tol;
  };
  std::vector<std::array<double, 2>> found;
  // Support of each L: {0}, {1} or mixed; mixed g_i is pinned by j's indifference.
  for (int s1 = 0; s1 < 3; ++s1) {
    for (int s2 = 0; s2 < 3; ++s2) {
      double g[2];
      bool ok = true;
      const int s[2] = {s1, s2};
      for (std::size_t i = 0; i < 2; ++i) {
        if (s[i] == 0) g[i] = 0.0;
        else if (s[i] == 1) g[i] = 1.0;
        else {
          // i mixes so that j is indifferent.
          const double pl = p_low[i];
          if (pl <= 0.0) { ok = false; break; }
          g[i] = gain / pl;
          if (!(g[i] > tol && g[i] < 1.0 - tol)) { ok = false; break; }
        }
      }
      if (!ok) continue;
      if (consistent(0, g[0], g[1]) && consistent(1, g[1], g[0])) found.push_back({g[0], g[1]});
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) {
    const double da = std::abs(a[0] - a[1]);
    const double db = std::abs(b[0] - b[1]);
    if (std::abs(da - db) > 1e-12) return da < db;
    return a[0] + a[1] > b[0] + b[1];
  });
  if (found.empty()) return {};
  return {found.front()[0], found.front()[1]};
}

}  // namespace oracle
