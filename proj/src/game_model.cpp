#include "spbe/game_model.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace spbe {

JointIndex::JointIndex(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  strides_.assign(sizes_.size(), 1);
  total_ = 1;
  for (std::size_t k = sizes_.size(); k-- > 0;) {
    strides_[k] = total_;
    total_ *= sizes_[k];
  }
}

std::size_t JointIndex::flatten(std::span<const std::size_t> components) const {
  if (components.size() != sizes_.size()) {
    throw std::invalid_argument("JointIndex::flatten: wrong number of components");
  }
  std::size_t flat = 0;
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (components[k] >= sizes_[k]) {
      throw std::out_of_range("JointIndex::flatten: component out of range");
    }
    flat += components[k] * strides_[k];
  }
  return flat;
}

std::vector<std::size_t> JointIndex::unflatten(std::size_t flat) const {
  if (flat >= total_) throw std::out_of_range("JointIndex::unflatten: index out of range");
  std::vector<std::size_t> out(sizes_.size());
  for (std::size_t k = 0; k < sizes_.size(); ++k) out[k] = component(flat, k);
  return out;
}

JointIndex GameSpec::type_index() const {
  std::vector<std::size_t> sizes;
  for (const auto& labels : type_labels) sizes.push_back(labels.size());
  return JointIndex(std::move(sizes));
}

JointIndex GameSpec::action_index() const {
  std::vector<std::size_t> sizes;
  for (const auto& labels : action_labels) sizes.push_back(labels.size());
  return JointIndex(std::move(sizes));
}

std::size_t GameSpec::joint_type_count() const {
  std::size_t n = 1;
  for (const auto& labels : type_labels) n *= labels.size();
  return n;
}

std::size_t GameSpec::joint_action_count() const {
  std::size_t n = 1;
  for (const auto& labels : action_labels) n *= labels.size();
  return n;
}

double GameSpec::transition_prob(std::size_t agent, std::size_t type, std::size_t joint_action,
                                 std::size_t next_type) const {
  const std::size_t n_types = num_types(agent);
  const std::size_t n_joint = joint_action_count();
  return transition[agent][(type * n_joint + joint_action) * n_types + next_type];
}

double GameSpec::reward_at(std::size_t agent, std::size_t joint_type,
                           std::size_t joint_action) const {
  return reward[agent][joint_type * joint_action_count() + joint_action];
}

double GameSpec::max_abs_reward() const {
  double m = 0.0;
  for (const auto& r : reward) {
    for (double v : r) m = std::max(m, std::abs(v));
  }
  return m;
}

SpecValidationError::SpecValidationError(std::vector<std::string> violations)
    : std::runtime_error([&] {
        std::string msg = "invalid game spec:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

namespace {

std::string path_str(const std::string& field, std::initializer_list<std::size_t> idx) {
  std::string s = field;
  for (auto i : idx) s += "[" + std::to_string(i) + "]";
  return s;
}

// Checks one probability row; appends at most one violation.
void check_row(std::span<const double> row, const std::string& where,
               std::vector<std::string>& out) {
  double sum = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (!std::isfinite(row[k])) {
      out.push_back(where + ": entry " + std::to_string(k) + " is not finite");
      return;
    }
    if (row[k] < 0.0) {
      out.push_back(where + ": entry " + std::to_string(k) + " is negative (" +
                    std::to_string(row[k]) + ")");
      return;
    }
    sum += row[k];
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) {
    std::ostringstream os;
    os << where << ": row sums to " << std::setprecision(12) << sum << ", expected 1";
    out.push_back(os.str());
  }
}

void normalize_row(std::span<double> row) {
  const double sum = std::accumulate(row.begin(), row.end(), 0.0);
  if (sum > 0.0) {
    for (double& v : row) v /= sum;
  }
}

}  // namespace

std::vector<std::string> validate_spec(const GameSpec& spec) {
  std::vector<std::string> out;
  const std::size_t n = spec.agents();
  if (n == 0) {
    out.push_back("agents: must be at least 1");
    return out;
  }
  if (spec.action_labels.size() != n) {
    out.push_back("actions: expected " + std::to_string(n) + " agents, got " +
                  std::to_string(spec.action_labels.size()));
    return out;
  }
  bool shapes_ok = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.type_labels[i].empty()) {
      out.push_back(path_str("types", {i}) + ": type set is empty");
      shapes_ok = false;
    }
    if (spec.action_labels[i].empty()) {
      out.push_back(path_str("actions", {i}) + ": action set is empty");
      shapes_ok = false;
    }
  }
  if (!shapes_ok) return out;

  const std::size_t n_joint_types = spec.type_index().size();
  const std::size_t n_joint_actions = spec.action_index().size();

  if (spec.initial_kernel.size() != n) {
    out.push_back("q0: expected " + std::to_string(n) + " agents");
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (spec.initial_kernel[i].size() != spec.num_types(i)) {
        out.push_back(path_str("q0", {i}) + ": expected " + std::to_string(spec.num_types(i)) +
                      " entries");
      } else {
        check_row(spec.initial_kernel[i], path_str("q0", {i}), out);
      }
    }
  }

  if (spec.transition.size() != n) {
    out.push_back("q: expected " + std::to_string(n) + " agents");
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t nt = spec.num_types(i);
      if (spec.transition[i].size() != nt * n_joint_actions * nt) {
        out.push_back(path_str("q", {i}) + ": expected shape [" + std::to_string(nt) + "][" +
                      std::to_string(n_joint_actions) + "][" + std::to_string(nt) + "]");
        continue;
      }
      for (std::size_t x = 0; x < nt; ++x) {
        for (std::size_t a = 0; a < n_joint_actions; ++a) {
          std::span<const double> row(spec.transition[i].data() + (x * n_joint_actions + a) * nt,
                                      nt);
          check_row(row, path_str("q", {i, x, a}), out);
        }
      }
    }
  }

  if (spec.reward.size() != n) {
    out.push_back("reward: expected " + std::to_string(n) + " agents");
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (spec.reward[i].size() != n_joint_types * n_joint_actions) {
        out.push_back(path_str("reward", {i}) + ": expected shape [" +
                      std::to_string(n_joint_types) + "][" + std::to_string(n_joint_actions) +
                      "]");
        continue;
      }
      for (std::size_t k = 0; k < spec.reward[i].size(); ++k) {
        if (!std::isfinite(spec.reward[i][k])) {
          out.push_back(path_str("reward", {i, k / n_joint_actions, k % n_joint_actions}) +
                        ": not finite");
        }
      }
    }
  }

  if (!std::isfinite(spec.discount) || spec.discount < 0.0) {
    out.push_back("delta: discount must be in [0, 1)");
  } else if (spec.discount >= 1.0) {
    out.push_back("delta: discount must be < 1");
  }
  return out;
}

void renormalize(GameSpec& spec) {
  for (auto& row : spec.initial_kernel) normalize_row(row);
  const std::size_t n_joint_actions = spec.action_index().size();
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    const std::size_t nt = spec.num_types(i);
    for (std::size_t r = 0; r < nt * n_joint_actions; ++r) {
      normalize_row(std::span<double>(spec.transition[i].data() + r * nt, nt));
    }
  }
}

void require_valid(GameSpec& spec) {
  auto violations = validate_spec(spec);
  if (!violations.empty()) throw SpecValidationError(std::move(violations));
  renormalize(spec);
}

namespace {

std::vector<std::string> read_labels(const nlohmann::json& arr, const std::string& what) {
  if (!arr.is_array()) throw SpecParseError(what + ": expected an array of labels");
  std::vector<std::string> out;
  for (const auto& v : arr) {
    if (v.is_string()) {
      out.push_back(v.get<std::string>());
    } else if (v.is_number()) {
      out.push_back(v.dump());
    } else {
      throw SpecParseError(what + ": labels must be strings or numbers");
    }
  }
  return out;
}

double read_number(const nlohmann::json& v, const std::string& what) {
  if (!v.is_number()) throw SpecParseError(what + ": expected a number");
  return v.get<double>();
}

// Appends a nested numeric array in row-major order.
void flatten_into(const nlohmann::json& v, std::vector<double>& out, const std::string& what) {
  if (v.is_array()) {
    for (std::size_t k = 0; k < v.size(); ++k) {
      flatten_into(v[k], out, what + "[" + std::to_string(k) + "]");
    }
  } else {
    out.push_back(read_number(v, what));
  }
}

}  // namespace

GameSpec spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SpecParseError("game spec: top level must be an object");
  for (const char* key : {"agents", "types", "actions", "q", "reward", "delta"}) {
    if (!doc.contains(key)) throw SpecParseError(std::string("game spec: missing field '") + key + "'");
  }
  if (!doc["agents"].is_number_integer() || doc["agents"].get<long long>() < 1) {
    throw SpecParseError("agents: expected a positive integer");
  }
  const auto n = static_cast<std::size_t>(doc["agents"].get<long long>());
  GameSpec spec;
  const auto& types = doc["types"];
  const auto& actions = doc["actions"];
  if (!types.is_array() || types.size() != n) {
    throw SpecParseError("types: expected one label array per agent");
  }
  if (!actions.is_array() || actions.size() != n) {
    throw SpecParseError("actions: expected one label array per agent");
  }
  for (std::size_t i = 0; i < n; ++i) {
    spec.type_labels.push_back(read_labels(types[i], "types[" + std::to_string(i) + "]"));
    spec.action_labels.push_back(read_labels(actions[i], "actions[" + std::to_string(i) + "]"));
  }

  if (doc.contains("q0") && !doc["q0"].is_null()) {
    const auto& q0 = doc["q0"];
    if (!q0.is_array() || q0.size() != n) throw SpecParseError("q0: expected one vector per agent");
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row;
      flatten_into(q0[i], row, "q0[" + std::to_string(i) + "]");
      spec.initial_kernel.push_back(std::move(row));
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t nt = spec.num_types(i);
      spec.initial_kernel.emplace_back(nt, nt ? 1.0 / static_cast<double>(nt) : 0.0);
    }
  }

  for (const char* key : {"q", "reward"}) {
    const auto& arr = doc[key];
    if (!arr.is_array() || arr.size() != n) {
      throw SpecParseError(std::string(key) + ": expected one tensor per agent");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> q, r;
    flatten_into(doc["q"][i], q, "q[" + std::to_string(i) + "]");
    flatten_into(doc["reward"][i], r, "reward[" + std::to_string(i) + "]");
    spec.transition.push_back(std::move(q));
    spec.reward.push_back(std::move(r));
  }
  spec.discount = read_number(doc["delta"], "delta");
  return spec;
}

nlohmann::json spec_to_json(const GameSpec& spec) {
  nlohmann::json doc;
  doc["agents"] = spec.agents();
  doc["types"] = spec.type_labels;
  doc["actions"] = spec.action_labels;
  doc["q0"] = spec.initial_kernel;
  const std::size_t n_joint_actions = spec.action_index().size();
  const std::size_t n_joint_types = spec.type_index().size();
  nlohmann::json q = nlohmann::json::array();
  nlohmann::json reward = nlohmann::json::array();
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    const std::size_t nt = spec.num_types(i);
    nlohmann::json qi = nlohmann::json::array();
    for (std::size_t x = 0; x < nt; ++x) {
      nlohmann::json by_action = nlohmann::json::array();
      for (std::size_t a = 0; a < n_joint_actions; ++a) {
        auto first = spec.transition[i].begin() + static_cast<std::ptrdiff_t>((x * n_joint_actions + a) * nt);
        by_action.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(nt)));
      }
      qi.push_back(std::move(by_action));
    }
    q.push_back(std::move(qi));
    nlohmann::json ri = nlohmann::json::array();
    for (std::size_t xj = 0; xj < n_joint_types; ++xj) {
      auto first = spec.reward[i].begin() + static_cast<std::ptrdiff_t>(xj * n_joint_actions);
      ri.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(n_joint_actions)));
    }
    reward.push_back(std::move(ri));
  }
  doc["q"] = std::move(q);
  doc["reward"] = std::move(reward);
  doc["delta"] = spec.discount;
  return doc;
}

GameSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open game spec '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecParseError("malformed JSON in '" + path.string() + "': " + e.what());
  }
  GameSpec spec = spec_from_json(doc);
  require_valid(spec);
  return spec;
}

void save_spec(const GameSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write game spec '" + path.string() + "'");
  out << spec_to_json(spec).dump(2) << '\n';
}

std::string spec_hash(const GameSpec& spec) {
  const std::string canonical = spec_to_json(spec).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(canonical.data(), canonical.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[k]);
  }
  return os.str();
}

GameSpec public_goods_spec(double x_high, double x_low, double delta) {
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw std::invalid_argument("public_goods_spec: discount must be in [0, 1)");
  }
  GameSpec spec;
  spec.type_labels = {{"H", "L"}, {"H", "L"}};
  spec.action_labels = {{"0", "1"}, {"0", "1"}};
  spec.initial_kernel = {{0.5, 0.5}, {0.5, 0.5}};
  spec.discount = delta;
  const double cost[2] = {x_high, x_low};
  // Static types: identity kernel for every joint action.
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> q(2 * 4 * 2, 0.0);
    for (std::size_t x = 0; x < 2; ++x) {
      for (std::size_t a = 0; a < 4; ++a) q[(x * 4 + a) * 2 + x] = 1.0;
    }
    spec.transition.push_back(std::move(q));
  }
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<double> r(4 * 4, 0.0);
    for (std::size_t x1 = 0; x1 < 2; ++x1) {
      for (std::size_t x2 = 0; x2 < 2; ++x2) {
        for (std::size_t a1 = 0; a1 < 2; ++a1) {
          for (std::size_t a2 = 0; a2 < 2; ++a2) {
            const std::size_t own_type = i == 0 ? x1 : x2;
            const std::size_t own_action = i == 0 ? a1 : a2;
            const std::size_t other_action = i == 0 ? a2 : a1;
            r[(x1 * 2 + x2) * 4 + (a1 * 2 + a2)] =
                own_action == 1 ? 1.0 - cost[own_type] : static_cast<double>(other_action);
          }
        }
      }
    }
    spec.reward.push_back(std::move(r));
  }
  return spec;
}

bool is_symmetric(const GameSpec& spec, double tol) {
  if (spec.agents() != 2) return false;
  if (spec.num_types(0) != spec.num_types(1) || spec.num_actions(0) != spec.num_actions(1)) {
    return false;
  }
  const std::size_t nt = spec.num_types(0);
  const std::size_t na = spec.num_actions(0);
  auto swap_pair = [](std::size_t first, std::size_t second, std::size_t radix) {
    return second * radix + first;
  };
  for (std::size_t x = 0; x < nt; ++x) {
    for (std::size_t a1 = 0; a1 < na; ++a1) {
      for (std::size_t a2 = 0; a2 < na; ++a2) {
        const std::size_t a = a1 * na + a2;
        const std::size_t a_swapped = swap_pair(a1, a2, na);
        for (std::size_t xn = 0; xn < nt; ++xn) {
          if (std::abs(spec.transition_prob(0, x, a, xn) -
                       spec.transition_prob(1, x, a_swapped, xn)) > tol) {
            return false;
          }
        }
      }
    }
  }
  for (std::size_t x1 = 0; x1 < nt; ++x1) {
    for (std::size_t x2 = 0; x2 < nt; ++x2) {
      for (std::size_t a1 = 0; a1 < na; ++a1) {
        for (std::size_t a2 = 0; a2 < na; ++a2) {
          const double r1 = spec.reward_at(0, x1 * nt + x2, a1 * na + a2);
          const double r2 = spec.reward_at(1, swap_pair(x1, x2, nt), swap_pair(a1, a2, na));
          if (std::abs(r1 - r2) > tol) return false;
        }
      }
    }
  }
  return true;
}

}  // namespace spbe
