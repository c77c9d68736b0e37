#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace spbe {

/// Mixed-radix index over an agent-ordered tuple (joint type or joint action
/// profile). Row-major with agent 0 slowest.
class JointIndex {
 public:
  JointIndex() = default;
  explicit JointIndex(std::vector<std::size_t> sizes);

  std::size_t size() const { return total_; }
  std::size_t agents() const { return sizes_.size(); }
  std::size_t radix(std::size_t agent) const { return sizes_[agent]; }
  std::size_t stride(std::size_t agent) const { return strides_[agent]; }

  std::size_t flatten(std::span<const std::size_t> components) const;
  std::vector<std::size_t> unflatten(std::size_t flat) const;
  std::size_t component(std::size_t flat, std::size_t agent) const {
    return (flat / strides_[agent]) % sizes_[agent];
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 1;
};

/// A finite-type dynamic game with privately observed, independently evolving
/// types and publicly observed actions.
///
/// Tensor layouts (all row-major):
///   initial_kernel[i][x]
///   transition[i][(x * |A| + a) * |X^i| + x_next]   a = joint action (flat)
///   reward[i][x_joint * |A| + a]                    |A| = joint action count
struct GameSpec {
  std::vector<std::vector<std::string>> type_labels;
  std::vector<std::vector<std::string>> action_labels;
  std::vector<std::vector<double>> initial_kernel;
  std::vector<std::vector<double>> transition;
  std::vector<std::vector<double>> reward;
  double discount = 0.0;

  std::size_t agents() const { return type_labels.size(); }
  std::size_t num_types(std::size_t agent) const { return type_labels[agent].size(); }
  std::size_t num_actions(std::size_t agent) const { return action_labels[agent].size(); }

  JointIndex type_index() const;
  JointIndex action_index() const;
  std::size_t joint_type_count() const;
  std::size_t joint_action_count() const;

  double transition_prob(std::size_t agent, std::size_t type, std::size_t joint_action,
                         std::size_t next_type) const;
  double reward_at(std::size_t agent, std::size_t joint_type, std::size_t joint_action) const;

  /// Largest absolute reward entry over all agents.
  double max_abs_reward() const;
};

class SpecParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SpecValidationError : public std::runtime_error {
 public:
  explicit SpecValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Probability rows must sum to one within this tolerance.
inline constexpr double kProbabilityTolerance = 1e-9;

/// Empty iff every structural and numeric invariant of the spec holds. Each
/// entry names the field and index path of the violation.
std::vector<std::string> validate_spec(const GameSpec& spec);

/// Rescales every probability row to sum to exactly one (up to rounding).
void renormalize(GameSpec& spec);

/// Throws SpecValidationError when validate_spec is non-empty, otherwise
/// renormalizes.
void require_valid(GameSpec& spec);

GameSpec spec_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const GameSpec& spec);

GameSpec load_spec(const std::filesystem::path& path);
void save_spec(const GameSpec& spec, const std::filesystem::path& path);

/// Hex SHA-256 of the canonical JSON serialization.
std::string spec_hash(const GameSpec& spec);

/// Two-agent public goods game with static types {high, low} (labels "H", "L")
/// and actions {0, 1} (1 = contribute).
GameSpec public_goods_spec(double x_high, double x_low, double delta);

/// True for two-agent games invariant under swapping the agents.
bool is_symmetric(const GameSpec& spec, double tol = 1e-12);

}  // namespace spbe
