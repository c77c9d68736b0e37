#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "spbe/game_model.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
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

struct Workdir {
  fs::path dir;
  explicit Workdir(const std::string& name) : dir(fs::temp_directory_path() / name) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string operator/(const std::string& leaf) const { return (dir / leaf).string(); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve, verify, simulate and export at discount zero") {
  Workdir w("spbe_cli_basic");
  REQUIRE(run("public-goods " + (w / "pg.json") + " --delta 0") == 0);
  CHECK(run("solve " + (w / "pg.json") + " --grid-step 0.1 --symmetric --out " + (w / "out")) == 0);
  CHECK(fs::exists(w / "out/value.json"));
  CHECK(fs::exists(w / "out/policy.json"));
  CHECK(fs::exists(w / "out/report.json"));
  CHECK(run("verify " + (w / "pg.json") + " --grid-step 0.1 --samples 100 --points 8 --out " +
            (w / "out")) == 0);
  const auto ver = nlohmann::json::parse(slurp(w / "out/verification.json"));
  CHECK(ver["passed"] == true);
  CHECK(run("simulate " + (w / "pg.json") + " --seeds 2 --horizon 5 --out " + (w / "out")) == 0);
  CHECK(fs::exists(w / "out/learning.json"));
  CHECK(fs::exists(w / "out/trajectory_0.csv"));
  CHECK(run("export-surface " + (w / "pg.json") + " --agent 1 --type L --out " + (w / "out")) == 0);
  CHECK(fs::exists(w / "out/surface_agent1_L_d0.csv"));
}

TEST_CASE("exported surfaces and simulations") {
  Workdir w("spbe_cli_surface");
  REQUIRE(run("public-goods " + (w / "pg.json") + " --delta 0") == 0);
  REQUIRE(run("solve " + (w / "pg.json") + " --grid-step 0.1 --symmetric --out " + (w / "o")) == 0);
  REQUIRE(run("export-surface " + (w / "pg.json") + " --agent 1 --type H --out " + (w / "o")) == 0);
  REQUIRE(run("export-surface " + (w / "pg.json") + " --agent 1 --type L --out " + (w / "o")) == 0);
  REQUIRE(run("export-surface " + (w / "pg.json") + " --agent 2 --type L --out " + (w / "o")) == 0);
  CHECK(run("export-surface " + (w / "pg.json") + " --agent 3 --type L --out " + (w / "o")) == 2);
  CHECK(run("export-surface " + (w / "pg.json") + " --agent 1 --type M --out " + (w / "o")) == 2);

  auto rows = [](const std::string& text) {
    std::map<std::pair<std::string, std::string>, std::string> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto c1 = line.find(',');
      const auto c2 = line.find(',', c1 + 1);
      out[{line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1)}] = line.substr(c2 + 1);
    }
    return out;
  };
  const auto high = rows(slurp(w / "o/surface_agent1_H_d0.csv"));
  CHECK(high.size() == 121);
  for (const auto& [pi, g] : high) CHECK(g == "0");
  const auto one = rows(slurp(w / "o/surface_agent1_L_d0.csv"));
  const auto two = rows(slurp(w / "o/surface_agent2_L_d0.csv"));
  for (const auto& [pi, g] : one) CHECK(two.at({pi.second, pi.first}) == g);
  // Agent 2 likely L: agent 1 of type L leaves the contribution to agent 2.
  CHECK(one.at({"0.5", "0"}) == "0");

  CHECK(run("simulate " + (w / "pg.json") + " --seeds 3 --horizon 8 --out " + (w / "o")) == 0);
  const std::string first = slurp(w / "o/learning.json") + slurp(w / "o/trajectory_1.csv");
  CHECK(run("simulate " + (w / "pg.json") + " --seeds 3 --horizon 8 --out " + (w / "o")) == 0);
  CHECK(first == slurp(w / "o/learning.json") + slurp(w / "o/trajectory_1.csv"));
  CHECK(run("simulate " + (w / "pg.json") + " --seeds 2 --horizon 1 --out " + (w / "o")) == 0);
  const auto stats = nlohmann::json::parse(slurp(w / "o/learning.json"));
  CHECK(stats["horizon"] == 1);
}

TEST_CASE("finite horizon writes one artifact pair per stage") {
  Workdir w("spbe_cli_finite");
  REQUIRE(run("public-goods " + (w / "pg.json") + " --delta 0.9") == 0);
  CHECK(run("solve-finite " + (w / "pg.json") + " --horizon 3 --grid-step 0.25 --out " +
            (w / "f")) == 0);
  for (int t = 1; t <= 3; ++t) {
    CHECK(fs::exists(w / ("f/value_t" + std::to_string(t) + ".json")));
    CHECK(fs::exists(w / ("f/policy_t" + std::to_string(t) + ".json")));
  }
  CHECK(run("solve-finite " + (w / "pg.json") + " --horizon 2 --grid-step 0.25 --terminal " +
            (w / "f/value_t1.json") + " --out " + (w / "g")) == 0);
}

TEST_CASE("artifacts are identical across thread counts") {
  Workdir w("spbe_cli_threads");
  REQUIRE(run("public-goods " + (w / "pg.json") + " --delta 0.5") == 0);
  CHECK(run("solve " + (w / "pg.json") + " --grid-step 0.1 --threads 1 --out " + (w / "a")) == 0);
  CHECK(run("solve " + (w / "pg.json") + " --grid-step 0.1 --threads 3 --out " + (w / "b")) == 0);
  for (const char* f : {"value.json", "policy.json", "report.json"}) {
    CHECK(slurp(w / (std::string("a/") + f)) == slurp(w / (std::string("b/") + f)));
  }
}

TEST_CASE("exit codes") {
  Workdir w("spbe_cli_codes");
  REQUIRE(run("public-goods " + (w / "pg.json") + " --delta 0.9") == 0);
  const std::string pg = w / "pg.json";
  CHECK(run("solve " + pg + " --grid-step 0.7") == 2);
  CHECK(run("solve " + pg + " --grid-step 0") == 2);
  CHECK(run("solve " + pg + " --tol-v -1") == 2);
  CHECK(run("solve " + pg + " --bogus") == 2);
  CHECK(run("solve " + (w / "missing.json")) == 4);
  CHECK(run("solve " + pg + " --grid-step 0.25 --max-sweeps 2 --out " + (w / "short")) == 3);

  {
    std::ofstream bad(w / "bad.json");
    bad << "{\"types\": [[\"a\"]]";
  }
  CHECK(run("solve " + (w / "bad.json")) == 2);

  REQUIRE(run("public-goods " + (w / "other.json") + " --delta 0.5") == 0);
  CHECK(run("verify " + (w / "other.json") + " --out " + (w / "short")) == 5);

  auto doc = nlohmann::json::parse(slurp(w / "short/value.json"));
  doc["values"][3] = nullptr;
  {
    std::ofstream out(w / "short/value.json");
    out << doc.dump();
  }
  CHECK(run("verify " + pg + " --out " + (w / "short")) == 2);
}

}
