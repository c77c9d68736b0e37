#include "spbe/stage_game.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace spbe {

StageGame::StageGame(const GameSpec& spec) : spec_(spec) {
  n_ = spec_.agents();
  const JointIndex types = spec_.type_index();
  const JointIndex actions = spec_.action_index();
  n_joint_types_ = types.size();
  n_joint_actions_ = actions.size();
  type_comp_.resize(n_joint_types_ * n_);
  action_comp_.resize(n_joint_actions_ * n_);
  for (std::size_t x = 0; x < n_joint_types_; ++x) {
    for (std::size_t i = 0; i < n_; ++i) type_comp_[x * n_ + i] = types.component(x, i);
  }
  for (std::size_t a = 0; a < n_joint_actions_; ++a) {
    for (std::size_t i = 0; i < n_; ++i) action_comp_[a * n_ + i] = actions.component(a, i);
  }
  for (std::size_t i = 0; i < n_; ++i) {
    slot_offset_.push_back(slots_);
    slots_ += spec_.num_types(i);
  }
  symmetric_ = is_symmetric(spec_);
  binary_actions_ = true;
  for (std::size_t i = 0; i < n_; ++i) binary_actions_ = binary_actions_ && spec_.num_actions(i) == 2;
}

StageProblem::StageProblem(const StageGame& game, ProductBelief pi,
                           const ValueFunction* continuation)
    : game_(game),
      pi_(std::move(pi)),
      continuation_(game.spec().discount > 0.0 ? continuation : nullptr),
      discount_(game.spec().discount) {
  const GameSpec& spec = game_.spec();
  if (continuation_ != nullptr) {
    next_.assign(game_.joint_actions(), pi_);
    cont_.assign(game_.joint_actions() * game_.slots(), 0.0);
    coef_.assign(game_.slots() * game_.joint_actions(), 0.0);
  }
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    weight_.emplace_back(spec.num_types(i) * spec.num_actions(i), 0.0);
  }
}

void StageProblem::action_values(const Prescription& gamma, ActionValues& q) {
  ++evaluations_;
  const GameSpec& spec = game_.spec();
  const std::size_t n = game_.agents();
  const std::size_t n_ja = game_.joint_actions();
  const std::size_t n_jt = game_.joint_types();

  if (continuation_ != nullptr) {
    const std::size_t slots = game_.slots();
    for (std::size_t a = 0; a < n_ja; ++a) {
      for (std::size_t j = 0; j < n; ++j) {
        update_marginal_into(spec, j, pi_[j], gamma.agent_table(j), a, next_[a][j]);
      }
      continuation_->evaluate(next_[a], std::span<double>(cont_.data() + a * slots, slots));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t nt = spec.num_types(i);
      const double* trans = spec.transition[i].data();
      for (std::size_t x = 0; x < nt; ++x) {
        double* c = coef_.data() + game_.slot(i, x) * n_ja;
        for (std::size_t a = 0; a < n_ja; ++a) {
          const double* row = trans + (x * n_ja + a) * nt;
          const double* v = cont_.data() + a * slots + game_.slot(i, 0);
          double acc = 0.0;
          for (std::size_t xn = 0; xn < nt; ++xn) acc += row[xn] * v[xn];
          c[a] = acc;
        }
      }
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t na = spec.num_actions(j);
    for (std::size_t x = 0; x < spec.num_types(j); ++x) {
      for (std::size_t b = 0; b < na; ++b) weight_[j][x * na + b] = pi_[j][x] * gamma(j, x, b);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t x = 0; x < spec.num_types(i); ++x) {
      for (double& v : q.row(i, x)) v = 0.0;
    }
  }

  for (std::size_t xj = 0; xj < n_jt; ++xj) {
    for (std::size_t aj = 0; aj < n_ja; ++aj) {
      for (std::size_t i = 0; i < n; ++i) {
        double w = 1.0;
        for (std::size_t j = 0; j < n && w != 0.0; ++j) {
          if (j == i) continue;
          w *= weight_[j][game_.type_of(xj, j) * spec.num_actions(j) + game_.action_of(aj, j)];
        }
        if (w == 0.0) continue;
        const std::size_t own_type = game_.type_of(xj, i);
        double term = spec.reward[i][xj * n_ja + aj];
        if (continuation_ != nullptr) {
          term += discount_ * coef_[game_.slot(i, own_type) * n_ja + aj];
        }
        q(i, own_type, game_.action_of(aj, i)) += w * term;
      }
    }
  }
}

double StageProblem::residual(const Prescription& gamma, const ActionValues& q) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < gamma.agents(); ++i) {
    for (std::size_t x = 0; x < gamma.num_types(i); ++x) {
      auto qr = q.row(i, x);
      auto gr = gamma.row(i, x);
      double best = -std::numeric_limits<double>::infinity();
      double achieved = 0.0;
      for (std::size_t a = 0; a < qr.size(); ++a) {
        best = std::max(best, qr[a]);
        achieved += gr[a] * qr[a];
      }
      worst = std::max(worst, best - achieved);
    }
  }
  return worst;
}

std::vector<double> StageProblem::stage_values(const Prescription& gamma,
                                               const ActionValues& q) const {
  std::vector<double> out;
  out.reserve(game_.slots());
  for (std::size_t i = 0; i < gamma.agents(); ++i) {
    for (std::size_t x = 0; x < gamma.num_types(i); ++x) {
      auto qr = q.row(i, x);
      auto gr = gamma.row(i, x);
      double v = 0.0;
      for (std::size_t a = 0; a < qr.size(); ++a) v += gr[a] * qr[a];
      out.push_back(v);
    }
  }
  return out;
}

std::vector<double> action_values(const GameSpec& spec, const ProductBelief& pi,
                                  const Prescription& gamma, const ValueFunction& continuation,
                                  std::size_t agent, std::size_t type) {
  StageGame game(spec);
  StageProblem problem(game, pi, &continuation);
  ActionValues q(spec);
  problem.action_values(gamma, q);
  auto r = q.row(agent, type);
  return {r.begin(), r.end()};
}

std::pair<std::vector<std::size_t>, double> best_response(std::span<const double> q,
                                                          double tie_tol) {
  double best = -std::numeric_limits<double>::infinity();
  for (double v : q) best = std::max(best, v);
  std::vector<std::size_t> set;
  for (std::size_t a = 0; a < q.size(); ++a) {
    if (q[a] >= best - tie_tol) set.push_back(a);
  }
  return {std::move(set), best};
}

double asymmetry(const Prescription& gamma) {
  if (gamma.agents() != 2) return 0.0;
  double s = 0.0;
  auto t0 = gamma.agent_table(0);
  auto t1 = gamma.agent_table(1);
  for (std::size_t k = 0; k < std::min(t0.size(), t1.size()); ++k) s += std::abs(t0[k] - t1[k]);
  return s;
}

namespace {

// One (agent, own type) entry of the prescription that the solver varies.
struct Slot {
  std::size_t agent;
  std::size_t type;
};

// Mixing probabilities this close to 0 or 1 are treated as pure.
constexpr double kSnapPure = 1e-6;

class FixedPointSearch {
 public:
  FixedPointSearch(const StageGame& game, const ProductBelief& pi,
                   const ValueFunction* continuation, const SolverConfig& config)
      : game_(game),
        spec_(game.spec()),
        config_(config),
        problem_(game, pi, continuation),
        q_(game.spec()),
        best_(game.spec()) {
    diagonal_ = config_.symmetric && pi.agents() == 2 && pi[0] == pi[1];
    const std::size_t free_agents = diagonal_ ? 1 : spec_.agents();
    for (std::size_t i = 0; i < free_agents; ++i) {
      for (std::size_t x = 0; x < spec_.num_types(i); ++x) free_.push_back({i, x});
    }
  }

  StageFixedPointReport run(const Prescription* warm) {
    // Without a warm start: first solution, or the least asymmetric one under
    // symmetric solving. After a rejected warm start: the closest solution.
    const bool select_least_asymmetric = config_.symmetric && !diagonal_;
    std::optional<Prescription> chosen;
    double chosen_score = std::numeric_limits<double>::infinity();
    auto consider = [&](Prescription&& candidate) {
      if (warm == nullptr && !select_least_asymmetric) {
        chosen = std::move(candidate);
        return true;
      }
      const double score = warm != nullptr ? distance(candidate, *warm) : asymmetry(candidate);
      if (score < chosen_score - 1e-12) {
        chosen_score = score;
        chosen = std::move(candidate);
      }
      return warm == nullptr && chosen_score <= 1e-12;
    };

    if (warm != nullptr) {
      Prescription start = *warm;
      tie_agents(start);
      ++restarts_;
      if (game_.binary_actions()) {
        std::vector<std::size_t> pattern;
        for (std::size_t k = 0; k < free_.size(); ++k) {
          const double p = start(free_[k].agent, free_[k].type, 1);
          pattern.push_back(p <= kSnapPure ? 0 : (p >= 1.0 - kSnapPure ? 1 : 2));
        }
        if (auto found = solve_support(pattern, &start)) return finish(*found, true);
        if (auto found = neighbour_support(pattern, start)) return finish(*found, true);
      }
      if (auto found = iterate(start)) return finish(*found, true);
    }

    bool done = false;
    for_each_pure_start([&](Prescription& start) {
      ++restarts_;
      if (auto found = iterate(start)) done = consider(std::move(*found));
      return !done;
    });
    if (!done) {
      Prescription start = Prescription::uniform(spec_);
      ++restarts_;
      if (auto found = iterate(start)) done = consider(std::move(*found));
    }
    if (!done && config_.support_enumeration && game_.binary_actions() &&
        free_.size() <= config_.max_enumeration_slots) {
      std::vector<std::size_t> pattern(free_.size(), 0);
      while (!done) {
        ++restarts_;
        if (auto found = solve_support(pattern, nullptr)) done = consider(std::move(*found));
        std::size_t k = pattern.size();
        while (k > 0 && pattern[k - 1] == 2) pattern[--k] = 0;
        if (k == 0) break;
        ++pattern[k - 1];
      }
    }
    if (chosen) return finish(*chosen, false);
    return finish(best_, false);
  }

 private:
  void tie_agents(Prescription& gamma) const {
    if (!diagonal_) return;
    for (std::size_t x = 0; x < spec_.num_types(0); ++x) {
      auto src = gamma.row(0, x);
      auto dst = gamma.row(1, x);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }

  // Evaluates q at gamma and tracks the best residual seen.
  double evaluate(const Prescription& gamma) {
    problem_.action_values(gamma, q_);
    const double r = problem_.residual(gamma, q_);
    if (r < best_residual_) {
      best_residual_ = r;
      best_ = gamma;
    }
    return r;
  }

  std::optional<Prescription> iterate(Prescription gamma) {
    tie_agents(gamma);
    const double lambda = config_.damping;
    for (int it = 0; it <= config_.max_iterations; ++it) {
      if (evaluate(gamma) <= config_.eq_tolerance) return polish(std::move(gamma));
      if (it == config_.max_iterations) break;
      for (const Slot& s : free_) {
        auto [set, value] = best_response(q_.row(s.agent, s.type), config_.tie_tolerance);
        const double share = 1.0 / static_cast<double>(set.size());
        auto row = gamma.row(s.agent, s.type);
        for (double& v : row) v *= 1.0 - lambda;
        for (std::size_t a : set) row[a] += lambda * share;
      }
      tie_agents(gamma);
    }
    return std::nullopt;
  }

  // Re-solves a damped best-response limit on its support pattern so that
  // near-pure entries become exact.
  Prescription polish(Prescription gamma) {
    if (!game_.binary_actions()) return gamma;
    constexpr double kSnap = 1e-4;
    std::vector<std::size_t> pattern;
    for (const Slot& s : free_) {
      const double p = gamma(s.agent, s.type, 1);
      pattern.push_back(p <= kSnap ? 0 : (p >= 1.0 - kSnap ? 1 : 2));
    }
    if (auto found = solve_support(pattern, &gamma)) return std::move(*found);
    return gamma;
  }

  // Calls fn on each pure profile of the free slots in lexicographic order.
  template <typename Fn>
  void for_each_pure_start(Fn&& fn) {
    std::vector<std::size_t> digits(free_.size(), 0);
    std::size_t produced = 0;
    while (produced < config_.max_pure_starts) {
      Prescription start(spec_);
      for (std::size_t k = 0; k < free_.size(); ++k) start(free_[k].agent, free_[k].type, digits[k]) = 1.0;
      ++produced;
      if (!fn(start)) return;
      std::size_t k = digits.size();
      while (k > 0 && digits[k - 1] + 1 == spec_.num_actions(free_[k - 1].agent)) digits[--k] = 0;
      if (k == 0) return;
      ++digits[k - 1];
    }
  }

  // pattern[k]: 0 / 1 = pure action, 2 = mixed (solved from indifference).
  std::optional<Prescription> solve_support(const std::vector<std::size_t>& pattern,
                                            const Prescription* start) {
    Prescription gamma(spec_);
    std::vector<std::size_t> mixed;
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const Slot& s = free_[k];
      if (pattern[k] == 2) {
        mixed.push_back(k);
        const double p = start != nullptr ? (*start)(s.agent, s.type, 1) : 0.5;
        set_mixed(gamma, s, p);
      } else {
        set_mixed(gamma, s, static_cast<double>(pattern[k]));
      }
    }
    tie_agents(gamma);
    if (!mixed.empty() && !newton(gamma, mixed)) return std::nullopt;
    if (!mixed.empty()) {
      Prescription snapped = gamma;
      bool moved = false;
      for (std::size_t k : mixed) {
        const double p = snapped(free_[k].agent, free_[k].type, 1);
        if (p <= kSnapPure || p >= 1.0 - kSnapPure) {
          set_mixed(snapped, free_[k], std::round(p));
          moved = true;
        }
      }
      tie_agents(snapped);
      if (moved && evaluate(snapped) <= config_.eq_tolerance) return snapped;
    }
    if (evaluate(gamma) <= config_.eq_tolerance) return gamma;
    return std::nullopt;
  }

  double distance(const Prescription& a, const Prescription& b) const {
    double d = 0.0;
    for (const Slot& s : free_) {
      auto ra = a.row(s.agent, s.type);
      auto rb = b.row(s.agent, s.type);
      for (std::size_t k = 0; k < ra.size(); ++k) d += std::abs(ra[k] - rb[k]);
    }
    return d;
  }

  // Patterns one slot away from `pattern` (pure <-> mixed), keeping the
  // solution closest to `start`.
  std::optional<Prescription> neighbour_support(const std::vector<std::size_t>& pattern,
                                                const Prescription& start) {
    std::optional<Prescription> closest;
    double closest_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pattern.size(); ++k) {
      const std::size_t options[2][2] = {{2, 2}, {0, 1}};
      const auto& alt = pattern[k] == 2 ? options[1] : options[0];
      for (std::size_t j = 0; j < (pattern[k] == 2 ? 2u : 1u); ++j) {
        std::vector<std::size_t> p = pattern;
        p[k] = alt[j];
        ++restarts_;
        auto found = solve_support(p, &start);
        if (!found) continue;
        const double d = distance(*found, start);
        if (d < closest_dist) {
          closest_dist = d;
          closest = std::move(found);
        }
      }
    }
    return closest;
  }

  static void set_mixed(Prescription& gamma, const Slot& s, double p) {
    gamma(s.agent, s.type, 1) = p;
    gamma(s.agent, s.type, 0) = 1.0 - p;
  }

  Eigen::VectorXd indifference(Prescription& gamma, const std::vector<std::size_t>& mixed) {
    tie_agents(gamma);
    problem_.action_values(gamma, q_);
    Eigen::VectorXd f(static_cast<Eigen::Index>(mixed.size()));
    for (std::size_t m = 0; m < mixed.size(); ++m) {
      const Slot& s = free_[mixed[m]];
      f[static_cast<Eigen::Index>(m)] = q_(s.agent, s.type, 1) - q_(s.agent, s.type, 0);
    }
    return f;
  }

  // Solves q(1) = q(0) on the mixed slots by damped Newton with a
  // finite-difference Jacobian and a minimum-norm step.
  bool newton(Prescription& gamma, const std::vector<std::size_t>& mixed) {
    const auto m = static_cast<Eigen::Index>(mixed.size());
    constexpr double kTol = 1e-12;
    constexpr double kFd = 1e-7;
    Eigen::VectorXd p(m);
    for (Eigen::Index k = 0; k < m; ++k) p[k] = gamma(free_[mixed[k]].agent, free_[mixed[k]].type, 1);
    auto assign = [&](const Eigen::VectorXd& v) {
      for (Eigen::Index k = 0; k < m; ++k) set_mixed(gamma, free_[mixed[k]], v[k]);
    };
    assign(p);
    Eigen::VectorXd f = indifference(gamma, mixed);
    for (int it = 0; it < 60; ++it) {
      if (f.lpNorm<Eigen::Infinity>() <= kTol) return true;
      Eigen::MatrixXd jac(m, m);
      for (Eigen::Index k = 0; k < m; ++k) {
        Eigen::VectorXd pk = p;
        const double h = pk[k] + kFd <= 1.0 ? kFd : -kFd;
        pk[k] += h;
        assign(pk);
        jac.col(k) = (indifference(gamma, mixed) - f) / h;
      }
      const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-f);
      if (!step.allFinite() || step.lpNorm<Eigen::Infinity>() == 0.0) break;
      double scale = 1.0;
      bool improved = false;
      const double f_norm = f.norm();
      for (int ls = 0; ls < 30; ++ls, scale *= 0.5) {
        Eigen::VectorXd trial = (p + scale * step).cwiseMax(0.0).cwiseMin(1.0);
        assign(trial);
        Eigen::VectorXd ft = indifference(gamma, mixed);
        if (ft.norm() < f_norm) {
          p = trial;
          f = ft;
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }
    assign(p);
    tie_agents(gamma);
    return f.lpNorm<Eigen::Infinity>() <= 1e-9;
  }

  StageFixedPointReport finish(const Prescription& gamma, bool warm) {
    StageFixedPointReport report;
    report.prescription = gamma;
    problem_.action_values(report.prescription, q_);
    report.residual = problem_.residual(report.prescription, q_);
    report.values = problem_.stage_values(report.prescription, q_);
    report.converged = report.residual <= config_.eq_tolerance;
    report.iterations = problem_.evaluations();
    report.restarts = restarts_;
    report.warm_started = warm;
    return report;
  }

  const StageGame& game_;
  const GameSpec& spec_;
  const SolverConfig& config_;
  StageProblem problem_;
  ActionValues q_;
  Prescription best_;
  double best_residual_ = std::numeric_limits<double>::infinity();
  std::vector<Slot> free_;
  bool diagonal_ = false;
  int restarts_ = 0;
};

}  // namespace

StageFixedPointReport stage_fixed_point(const StageGame& game, const ProductBelief& pi,
                                        const ValueFunction* continuation,
                                        const SolverConfig& config,
                                        const Prescription* warm_start) {
  if (config.symmetric && !game.symmetric()) {
    throw std::invalid_argument("symmetric solving requested for an asymmetric game");
  }
  FixedPointSearch search(game, pi, continuation, config);
  return search.run(warm_start);
}

StageFixedPointReport stage_fixed_point(const GameSpec& spec, const ProductBelief& pi,
                                        const ValueFunction* continuation,
                                        const SolverConfig& config) {
  StageGame game(spec);
  return stage_fixed_point(game, pi, continuation, config, nullptr);
}

}  // namespace spbe
