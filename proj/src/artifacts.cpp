#include "spbe/artifacts.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace spbe {

using nlohmann::json;

json to_json(const RunConfig& c) {
  return {{"command", c.command},
          {"spec_path", c.spec_path},
          {"grid_step", c.grid_step},
          {"tol_value", c.tol_value},
          {"tol_residual", c.tol_residual},
          {"max_sweeps", c.max_sweeps},
          {"seed", c.seed},
          {"symmetric", c.symmetric},
          {"export_format", c.export_format}};
}

namespace {

json grid_json(const BeliefGrid& grid) {
  return {{"step", grid.step()},
          {"intervals", grid.intervals()},
          {"axes", grid.axes()},
          {"type_counts", grid.type_counts()},
          {"nodes", grid.size()}};
}

json header(const char* format, const GameSpec& spec, const BeliefGrid& grid,
            const RunConfig& config) {
  return {{"format", format},
          {"spec_hash", spec_hash(spec)},
          {"config", to_json(config)},
          {"grid", grid_json(grid)}};
}

std::string describe_node(const BeliefGrid& grid, std::size_t node) {
  std::ostringstream os;
  os << "node " << node << " (coordinates";
  for (std::size_t d = 0; d < grid.axes(); ++d) {
    os << (d == 0 ? " " : ", ") << grid.axis_value(grid.axis_index(node, d));
  }
  os << ")";
  return os.str();
}

void check_header(const char* format, const GameSpec& spec, const json& doc) {
  if (!doc.is_object() || !doc.contains("format") || !doc["format"].is_string()) {
    throw ArtifactCorrupt("artifact has no format tag");
  }
  if (doc["format"].get<std::string>() != format) {
    throw ArtifactMismatch("expected a " + std::string(format) + " artifact, found " +
                           doc["format"].get<std::string>());
  }
  if (!doc.contains("spec_hash") || !doc["spec_hash"].is_string()) {
    throw ArtifactCorrupt("artifact has no spec_hash");
  }
  const std::string expected = spec_hash(spec);
  if (doc["spec_hash"].get<std::string>() != expected) {
    throw ArtifactMismatch("artifact spec hash " + doc["spec_hash"].get<std::string>() +
                           " does not match the game spec (" + expected + ")");
  }
}

BeliefGrid grid_from_header(const GameSpec& spec, const json& doc) {
  const double step = artifact_grid_step(doc);
  BeliefGrid grid(spec, step);
  const json& g = doc["grid"];
  if (g.value("intervals", std::size_t{0}) != grid.intervals() ||
      g.value("nodes", std::size_t{0}) != grid.size()) {
    throw ArtifactMismatch("artifact grid does not match the game spec");
  }
  return grid;
}

const json& array_field(const json& doc, const char* name, std::size_t size) {
  if (!doc.contains(name) || !doc[name].is_array()) {
    throw ArtifactCorrupt(std::string("artifact field '") + name + "' is missing");
  }
  const json& a = doc[name];
  if (a.size() != size) {
    throw ArtifactCorrupt(std::string("artifact field '") + name + "' has " +
                          std::to_string(a.size()) + " entries, expected " +
                          std::to_string(size));
  }
  return a;
}

double finite_entry(const json& a, std::size_t k, const std::string& where) {
  if (!a[k].is_number()) {
    throw ArtifactCorrupt("non-numeric entry at " + where);
  }
  const double v = a[k].get<double>();
  if (!std::isfinite(v)) throw ArtifactCorrupt("non-finite entry at " + where);
  return v;
}

}  // namespace

double artifact_grid_step(const json& doc) {
  if (!doc.contains("grid") || !doc["grid"].is_object() || !doc["grid"].contains("intervals") ||
      !doc["grid"]["intervals"].is_number_unsigned()) {
    throw ArtifactCorrupt("artifact has no grid description");
  }
  const auto n = doc["grid"]["intervals"].get<std::size_t>();
  if (n == 0) throw ArtifactCorrupt("artifact grid has zero intervals");
  return 1.0 / static_cast<double>(n);
}

json value_table_json(const GameSpec& spec, const ValueTable& values, const RunConfig& config) {
  json doc = header(kValueFormat, spec, values.grid(), config);
  doc["index_order"] = "values[node * slots + slot]; slot = offset(agent) + own type";
  doc["slots"] = values.slots();
  doc["values"] = values.raw();
  return doc;
}

json policy_grid_json(const GameSpec& spec, const PolicyGrid& policy, const RunConfig& config) {
  json doc = header(kPolicyFormat, spec, policy.grid(), config);
  std::size_t per_node = 0;
  for (std::size_t i = 0; i < spec.agents(); ++i) per_node += spec.num_types(i) * spec.num_actions(i);
  std::vector<double> probs;
  probs.reserve(policy.size() * per_node);
  std::vector<double> residuals;
  std::vector<bool> converged;
  for (std::size_t node = 0; node < policy.size(); ++node) {
    const Prescription& g = policy.at(node);
    for (std::size_t i = 0; i < spec.agents(); ++i) {
      auto t = g.agent_table(i);
      probs.insert(probs.end(), t.begin(), t.end());
    }
    residuals.push_back(policy.diagnostics(node).residual);
    converged.push_back(policy.diagnostics(node).converged);
  }
  doc["index_order"] =
      "probabilities[node * entries_per_node + offset(agent) + type * |A^i| + action]";
  doc["entries_per_node"] = per_node;
  doc["probabilities"] = std::move(probs);
  doc["residual"] = std::move(residuals);
  doc["converged"] = std::move(converged);
  return doc;
}

json solve_report_json(const GameSpec& spec, const SolveReport& r, const RunConfig& config) {
  json doc = header(kReportFormat, spec, r.values.grid(), config);
  const double scale = 1.0 - spec.discount;
  json ranges = json::array();
  const BeliefGrid& grid = r.values.grid();
  for (std::size_t i = 0; i < spec.agents(); ++i) {
    for (std::size_t x = 0; x < spec.num_types(i); ++x) {
      double lo = INFINITY;
      double hi = -INFINITY;
      for (std::size_t node = 0; node < grid.size(); ++node) {
        if (!grid.feasible(node)) continue;
        const double v = scale * r.values.at(node, i, x);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      ranges.push_back({{"agent", i}, {"type", spec.type_labels[i][x]}, {"min", lo}, {"max", hi}});
    }
  }
  doc["status"] = to_string(r.status);
  doc["converged"] = r.converged;
  doc["message"] = r.message;
  doc["sweeps"] = r.sweeps;
  doc["change_history"] = r.change_history;
  doc["branch_switch_history"] = r.branch_switch_history;
  doc["oscillation"] = r.oscillation;
  doc["residual"] = {{"bellman", r.residual.bellman},
                     {"best_response_gap", r.residual.best_response_gap},
                     {"total", r.residual.total()},
                     {"normalized", r.normalized_residual}};
  doc["unconverged_points"] = r.policy.unconverged_count();
  doc["normalized_value_ranges"] = std::move(ranges);
  return doc;
}

ValueTable value_table_from_json(const GameSpec& spec, const json& doc) {
  check_header(kValueFormat, spec, doc);
  const BeliefGrid grid = grid_from_header(spec, doc);
  ValueTable table(grid);
  const json& a = array_field(doc, "values", table.raw().size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const std::size_t node = k / table.slots();
    std::size_t slot = k % table.slots();
    std::size_t agent = 0;
    while (slot >= spec.num_types(agent)) slot -= spec.num_types(agent++);
    const std::string where = "values[" + std::to_string(k) + "]: " + describe_node(grid, node) +
                              ", agent " + std::to_string(agent) + ", type " +
                              spec.type_labels[agent][slot];
    table.raw()[k] = finite_entry(a, k, where);
  }
  return table;
}

PolicyGrid policy_grid_from_json(const GameSpec& spec, const json& doc) {
  check_header(kPolicyFormat, spec, doc);
  const BeliefGrid grid = grid_from_header(spec, doc);
  PolicyGrid policy(grid, spec);
  std::size_t per_node = 0;
  for (std::size_t i = 0; i < spec.agents(); ++i) per_node += spec.num_types(i) * spec.num_actions(i);
  const json& a = array_field(doc, "probabilities", grid.size() * per_node);
  const json& res = array_field(doc, "residual", grid.size());
  const json& conv = array_field(doc, "converged", grid.size());
  std::size_t k = 0;
  for (std::size_t node = 0; node < grid.size(); ++node) {
    Prescription& g = policy.at(node);
    for (std::size_t i = 0; i < spec.agents(); ++i) {
      for (std::size_t x = 0; x < spec.num_types(i); ++x) {
        double sum = 0.0;
        for (std::size_t b = 0; b < spec.num_actions(i); ++b, ++k) {
          const std::string where = "probabilities[" + std::to_string(k) + "]: " +
                                    describe_node(grid, node) + ", agent " + std::to_string(i) +
                                    ", type " + spec.type_labels[i][x] + ", action " +
                                    spec.action_labels[i][b];
          const double p = finite_entry(a, k, where);
          if (p < -kProbabilityTolerance || p > 1.0 + kProbabilityTolerance) {
            throw ArtifactCorrupt("probability outside [0, 1] at " + where);
          }
          g(i, x, b) = p;
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
          throw ArtifactCorrupt("prescription row does not sum to one at " +
                                describe_node(grid, node) + ", agent " + std::to_string(i) +
                                ", type " + spec.type_labels[i][x]);
        }
      }
    }
    PointDiagnostics& d = policy.diagnostics(node);
    d.residual = finite_entry(res, node, "residual[" + std::to_string(node) + "]");
    if (!conv[node].is_boolean()) {
      throw ArtifactCorrupt("converged[" + std::to_string(node) + "] is not a boolean");
    }
    d.converged = conv[node].get<bool>();
  }
  return policy;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ArtifactCorrupt("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ValueTable load_value_table(const GameSpec& spec, const std::filesystem::path& path) {
  return value_table_from_json(spec, read_json(path));
}

PolicyGrid load_policy_grid(const GameSpec& spec, const std::filesystem::path& path) {
  return policy_grid_from_json(spec, read_json(path));
}

}  // namespace spbe
