// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// The exit status reflects whether every criterion could be evaluated; the
// verdicts themselves are in the output and in acceptance.json.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "oracles.hpp"
#include "spbe/artifacts.hpp"
#include "spbe/infinite_horizon.hpp"
#include "spbe/simulator.hpp"
#include "spbe/verifier.hpp"

using namespace spbe;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kHigh = 1.2;
constexpr double kLow = 0.2;
constexpr double kStep = 0.02;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Verdict {
  int id;
  std::string title;
  bool pass = false;
  std::vector<std::string> details;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Solved {
  GameSpec spec;
  SolveReport report;
  double seconds = 0.0;
};

Solved solve(double delta, bool symmetric, double max_seconds = 0.0) {
  Solved s;
  s.spec = public_goods_spec(kHigh, kLow, delta);
  FixedPointConfig cfg;
  cfg.grid_step = kStep;
  cfg.max_seconds = max_seconds;
  cfg.sweep.solver.symmetric = symmetric;
  const auto t0 = std::chrono::steady_clock::now();
  s.report = solve_fixed_point(s.spec, cfg);
  s.seconds = seconds_since(t0);
  std::fprintf(stderr, "  solved delta=%.2f: %s, %zu sweeps, %.1f s\n", delta,
               to_string(s.report.status).c_str(), s.report.sweeps, s.seconds);
  return s;
}

std::pair<double, double> normalized_range(const Solved& s, std::size_t agent, std::size_t type) {
  const BeliefGrid& grid = s.report.values.grid();
  const double scale = 1.0 - s.spec.discount;
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const double v = scale * s.report.values.at(node, agent, type);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

// Share of nodes with pi^1(H) >= 0.5 where agent 1 of type L does not contribute.
double silent_share(const Solved& s) {
  const BeliefGrid& grid = s.report.policy.grid();
  std::size_t total = 0, silent = 0;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const ProductBelief pi = grid.belief_at(node);
    if (pi[0][0] < 0.5 - 1e-12) continue;
    ++total;
    silent += s.report.policy.at(node)(0, 1, 1) <= 1e-6;
  }
  return static_cast<double>(silent) / static_cast<double>(total);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SPBE_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Verdict criterion1(const Solved& s0) {
  Verdict v{1, "dominant action at discount zero"};
  std::size_t violations = 0;
  for (std::size_t node = 0; node < s0.report.policy.size(); ++node) {
    for (std::size_t i = 0; i < 2; ++i) violations += s0.report.policy.at(node)(i, 0, 1) != 0.0;
  }
  v.details.push_back(fmt("nodes x agents with gamma(contribute | H) != 0: %zu", violations));
  v.details.push_back(fmt("solve time %.2f s (limit 5 s)", s0.seconds));
  v.pass = violations == 0 && s0.seconds < 5.0 && s0.report.converged;
  return v;
}

Verdict criterion2(const Solved& s0sym) {
  Verdict v{2, "discount zero equals the one-shot Bayesian equilibrium oracle"};
  const BeliefGrid& grid = s0sym.report.policy.grid();
  double worst = 0.0;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    const ProductBelief pi = grid.belief_at(node);
    const auto want = oracle::public_goods_bne(pi[0][0], pi[1][0], kLow);
    const Prescription& got = s0sym.report.policy.at(node);
    const double g[2] = {want.g1, want.g2};
    for (std::size_t i = 0; i < 2; ++i) {
      worst = std::max(worst, std::abs(got(i, 0, 1)));
      worst = std::max(worst, std::abs(got(i, 0, 0) - 1.0));
      worst = std::max(worst, std::abs(got(i, 1, 1) - g[i]));
      worst = std::max(worst, std::abs(got(i, 1, 0) - (1.0 - g[i])));
    }
  }
  v.details.push_back(fmt("max probability difference over %zu nodes: %.3g", grid.size(), worst));
  v.pass = worst <= 1e-6;
  return v;
}

Verdict criterion3(const Solved& s95) {
  Verdict v{3, "normalized value ranges at discount 0.95"};
  const auto [lo_l, hi_l] = normalized_range(s95, 0, 1);
  const auto [lo_h, hi_h] = normalized_range(s95, 0, 0);
  v.details.push_back(fmt("solver status %s after %zu sweeps (%.0f s), last change %.3g",
                          to_string(s95.report.status).c_str(), s95.report.sweeps, s95.seconds,
                          s95.report.change_history.empty() ? 0.0
                                                            : s95.report.change_history.back()));
  v.details.push_back(fmt("(1-d)V1(.,L) range [%.4f, %.4f], target [0.865, 0.894] +- 0.02", lo_l, hi_l));
  v.details.push_back(fmt("(1-d)V1(.,H) range [%.4f, %.4f], target [0.3, 0.395] +- 0.02", lo_h, hi_h));
  auto inside = [](double x, double a, double b) { return x >= a - 0.02 && x <= b + 0.02; };
  v.pass = inside(lo_l, 0.865, 0.894) && inside(hi_l, 0.865, 0.894) && inside(lo_h, 0.3, 0.395) &&
           inside(hi_h, 0.3, 0.395);
  v.details.push_back(fmt("runtime %.0f s (target 600 s)", s95.seconds));
  return v;
}

Verdict criterion4(const Solved& s95) {
  Verdict v{4, "coordination bounds"};
  const auto [full_l, none_l] = coordination_benchmarks(kLow);
  const auto [full_h, none_h] = coordination_benchmarks(kHigh);
  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  const bool exact = same(full_l, 0.9) && same(none_l, 0.81) && same(full_h, 0.4) && same(none_h, 0.16);
  v.details.push_back(fmt("benchmarks x=0.2: (%.17g, %.17g); x=1.2: (%.17g, %.17g)", full_l,
                          none_l, full_h, none_h));
  const double max_l = normalized_range(s95, 0, 1).second;
  const double max_h = normalized_range(s95, 0, 0).second;
  v.details.push_back(fmt("max (1-d)V1(.,L) %.4f vs bound %.2f; max (1-d)V1(.,H) %.4f vs bound %.2f",
                          max_l, full_l + 0.01, max_h, full_h + 0.01));
  v.pass = exact && max_l <= full_l + 0.01 && max_h <= full_h + 0.01;
  return v;
}

Verdict criterion5(const Solved& s0, const Solved& s50, const Solved& s95) {
  Verdict v{5, "non-contribution region grows with the discount"};
  const double a = silent_share(s0), b = silent_share(s50), c = silent_share(s95);
  v.details.push_back(fmt("share of nodes with pi1(H) >= 0.5 where gamma1(contribute | L) = 0: "
                          "d=0 %.4f, d=0.5 %.4f, d=0.95 %.4f", a, b, c));
  v.pass = a <= b && b <= c;
  return v;
}

Verdict criterion6(const Solved& s50) {
  Verdict v{6, "consistency with a 5-stage backward recursion at discount 0.5"};
  SweepOptions o;
  const Residual res = residual(s50.spec, s50.report.values, s50.report.policy);
  const double slack = (1.0 - s50.spec.discount) * res.bellman;
  const Lemma4Result l4 = lemma4_check(s50.spec, s50.report.values, 5, o, &s50.report.policy);
  const double tol = FixedPointConfig{}.tol_value + 10.0 * slack;
  v.details.push_back(fmt("solution %s after %zu sweeps", to_string(s50.report.status).c_str(),
                          s50.report.sweeps));
  v.details.push_back(fmt("normalized discrepancy %.3g (raw %.3g), tolerance %.3g (slack %.3g)",
                          l4.normalized, l4.discrepancy, tol, slack));
  v.pass = s50.report.converged && l4.normalized <= tol;
  return v;
}

Verdict criterion7(const Solved& s95) {
  Verdict v{7, "deviation suite at discount 0.95"};
  DeviationConfig cfg;
  const auto points = sample_points(s95.spec, s95.report.values.grid(), 64, cfg.seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto entries = deviation_suite(s95.spec, s95.report.values, s95.report.policy, points, cfg);
  std::size_t failed = 0;
  double worst = -INFINITY;
  std::string worst_name;
  for (const auto& e : entries) {
    failed += !e.pass;
    const double margin = e.gap - (cfg.eps_dev + e.tail + 3.0 * (1.0 - s95.spec.discount) * e.standard_error);
    if (margin > worst) {
      worst = margin;
      worst_name = e.deviation;
    }
  }
  v.details.push_back(fmt("%zu tests (64 points x %zu deviations), %zu failed, %.0f s",
                          entries.size(), entries.size() / 64, failed, seconds_since(t0)));
  v.details.push_back(fmt("largest gap minus allowance %.3g (%s)", worst, worst_name.c_str()));
  v.pass = failed == 0;
  return v;
}

Verdict criterion8() {
  Verdict v{8, "belief update against brute-force Bayes"};
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> three(1, 3);
  double worst = 0.0, worst_norm = 0.0;
  std::size_t calls = 0;
  while (calls < 10000) {
    const std::size_t n = 2 + calls % 2;
    std::vector<std::size_t> types(n), actions(n);
    for (std::size_t i = 0; i < n; ++i) {
      types[i] = three(rng);
      actions[i] = three(rng);
    }
    const double zero_prob = calls % 5 == 0 ? 0.5 : 0.0;
    const GameSpec g = oracle::random_game(rng, types, actions, 0.9, zero_prob);
    Prescription gamma(g);
    ProductBelief pi;
    for (std::size_t i = 0; i < n; ++i) {
      pi.marginals.push_back(oracle::random_simplex(rng, types[i], zero_prob));
      for (std::size_t x = 0; x < types[i]; ++x) {
        const auto row = oracle::random_simplex(rng, actions[i], zero_prob);
        for (std::size_t a = 0; a < actions[i]; ++a) gamma(i, x, a) = row[a];
      }
    }
    const std::size_t a =
        std::uniform_int_distribution<std::size_t>(0, g.joint_action_count() - 1)(rng);
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    const auto got = update_marginal(g, i, pi[i], gamma, a);
    const auto want = oracle::brute_force_update(g, i, pi, gamma, a);
    double sum = 0.0;
    for (std::size_t y = 0; y < got.size(); ++y) {
      worst = std::max(worst, std::abs(got[y] - want[y]));
      sum += got[y];
    }
    worst_norm = std::max(worst_norm, std::abs(sum - 1.0));
    ++calls;
  }
  v.details.push_back(fmt("%zu calls: max deviation %.3g, max normalization error %.3g", calls,
                          worst, worst_norm));
  v.pass = worst <= 1e-12 && worst_norm <= 1e-9;
  return v;
}

Verdict criterion9(const Solved& s95) {
  Verdict v{9, "type learning at discount 0.95"};
  const auto lattice = belief_lattice(s95.spec, 5);
  const LearningStats stats =
      markov_chain_ensemble(s95.spec, s95.report.policy, lattice, 40, 50, 0.95, 0, 0);
  const double frac = stats.fraction_within(10);
  v.details.push_back(fmt("%zu runs, %.1f%% reach 0.95 on both true types within 10 rounds "
                          "(threshold 80%%), median time %.1f",
                          stats.runs, 100.0 * frac, stats.median_time));
  v.pass = frac >= 0.8;
  return v;
}

Verdict criterion10() {
  Verdict v{10, "artifacts do not depend on the thread count"};
  const fs::path dir = fs::temp_directory_path() / "spbe_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string spec = (dir / "pg.json").string();
  bool ok = run_cli("public-goods " + spec + " --delta 0.95") == 0;
  std::size_t compared = 0, equal = 0;
  for (int k = 0; k < 2 && ok; ++k) {
    const std::string common = "solve " + spec + " --grid-step 0.05 --max-sweeps 15 --symmetric";
    const std::string a = (dir / ("a" + std::to_string(k))).string();
    const std::string b = (dir / ("b" + std::to_string(k))).string();
    const int ra = run_cli(common + " --threads 1 --out " + a);
    const int rb = run_cli(common + " --threads " + std::to_string(2 + 2 * k) + " --out " + b);
    ok = ok && ra == rb && (ra == 0 || ra == 3);
    for (const char* f : {"value.json", "policy.json", "report.json"}) {
      ++compared;
      const std::string x = slurp(fs::path(a) / f);
      equal += !x.empty() && x == slurp(fs::path(b) / f);
    }
  }
  v.details.push_back(fmt("%zu of %zu artifact pairs byte-identical across --threads", equal, compared));
  fs::remove_all(dir);
  v.pass = ok && equal == compared;
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  double budget = 540.0;
  if (argc > 1) budget = std::atof(argv[1]);
  std::vector<Verdict> verdicts;
  try {
    std::fprintf(stderr, "solving reference games at h = %.2f\n", kStep);
    const Solved s0 = solve(0.0, false);
    const Solved s0sym = solve(0.0, true);
    const Solved s50 = solve(0.5, true);
    const Solved s95 = solve(0.95, true, budget);

    verdicts.push_back(criterion1(s0));
    verdicts.push_back(criterion2(s0sym));
    verdicts.push_back(criterion3(s95));
    verdicts.push_back(criterion4(s95));
    verdicts.push_back(criterion5(s0sym, s50, s95));
    verdicts.push_back(criterion6(s50));
    verdicts.push_back(criterion7(s95));
    verdicts.push_back(criterion8());
    verdicts.push_back(criterion9(s95));
    verdicts.push_back(criterion10());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance run aborted: %s\n", e.what());
    return 2;
  }

  json out = json::array();
  std::size_t passed = 0;
  for (const auto& v : verdicts) {
    std::printf("criterion %2d: %s  %s\n", v.id, v.pass ? "PASS" : "FAIL", v.title.c_str());
    for (const auto& d : v.details) std::printf("    %s\n", d.c_str());
    passed += v.pass;
    out.push_back({{"criterion", v.id}, {"title", v.title}, {"pass", v.pass}, {"details", v.details}});
  }
  std::printf("%zu of %zu criteria passed\n", passed, verdicts.size());
  write_json("acceptance.json", out);
  return 0;
}
