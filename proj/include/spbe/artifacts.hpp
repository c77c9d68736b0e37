#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "spbe/belief_grid.hpp"
#include "spbe/game_model.hpp"
#include "spbe/infinite_horizon.hpp"

namespace spbe {

/// Settings that determine a run's results. Thread count and output location
/// are deliberately absent so artifacts do not depend on them.
struct RunConfig {
  std::string command;
  std::string spec_path;
  double grid_step = 0.02;
  double tol_value = 1e-5;
  double tol_residual = 1e-4;
  std::size_t max_sweeps = 2000;
  std::uint64_t seed = 0;
  bool symmetric = false;
  std::string export_format = "json";
};

nlohmann::json to_json(const RunConfig& config);

/// Artifact belongs to another spec, grid or kind.
class ArtifactMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Artifact is structurally broken or holds non-finite numbers.
class ArtifactCorrupt : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kValueFormat = "spbe.value_table/1";
inline constexpr const char* kPolicyFormat = "spbe.policy_grid/1";
inline constexpr const char* kReportFormat = "spbe.solve_report/1";

nlohmann::json value_table_json(const GameSpec& spec, const ValueTable& values,
                                const RunConfig& config);
nlohmann::json policy_grid_json(const GameSpec& spec, const PolicyGrid& policy,
                                const RunConfig& config);
nlohmann::json solve_report_json(const GameSpec& spec, const SolveReport& report,
                                 const RunConfig& config);

ValueTable value_table_from_json(const GameSpec& spec, const nlohmann::json& doc);
PolicyGrid policy_grid_from_json(const GameSpec& spec, const nlohmann::json& doc);

/// Reads a JSON document; IoError if unreadable, ArtifactCorrupt if malformed.
nlohmann::json read_json(const std::filesystem::path& path);
/// Writes `doc` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

ValueTable load_value_table(const GameSpec& spec, const std::filesystem::path& path);
PolicyGrid load_policy_grid(const GameSpec& spec, const std::filesystem::path& path);

/// Reads a grid step from an artifact header without loading the table.
double artifact_grid_step(const nlohmann::json& doc);

}  // namespace spbe
