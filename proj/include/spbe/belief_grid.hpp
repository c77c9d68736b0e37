#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "spbe/belief.hpp"
#include "spbe/game_model.hpp"

namespace spbe {

/// Uniform product grid over the per-agent belief simplices.
///
/// Agent i contributes |X^i| - 1 axes holding pi^i(x) for the first |X^i| - 1
/// types; each axis has n + 1 points k / n with n = round(1 / step). Nodes whose
/// coordinates for some agent sum past one lie outside the simplex and carry the
/// normalized (projected) belief instead.
class BeliefGrid {
 public:
  static constexpr std::size_t kMaxAxes = 16;

  BeliefGrid() = default;
  BeliefGrid(const GameSpec& spec, double step);
  BeliefGrid(std::vector<std::size_t> num_types, std::size_t intervals);

  double step() const { return 1.0 / static_cast<double>(intervals_); }
  std::size_t intervals() const { return intervals_; }
  std::size_t points_per_axis() const { return intervals_ + 1; }
  std::size_t axes() const { return axes_; }
  std::size_t size() const { return size_; }
  std::size_t agents() const { return num_types_.size(); }
  std::size_t num_types(std::size_t agent) const { return num_types_[agent]; }
  const std::vector<std::size_t>& type_counts() const { return num_types_; }
  std::size_t first_axis(std::size_t agent) const { return axis_offset_[agent]; }

  /// Axis coordinate index (0..n) of a node along one axis.
  std::size_t axis_index(std::size_t node, std::size_t axis) const {
    return (node / stride_[axis]) % points_per_axis();
  }
  double axis_value(std::size_t index) const {
    return static_cast<double>(index) / static_cast<double>(intervals_);
  }

  ProductBelief belief_at(std::size_t node) const;
  bool feasible(std::size_t node) const;

  std::size_t nearest_node(const ProductBelief& pi) const;

  /// Up to 2^axes corner nodes with multilinear weights.
  struct Stencil {
    std::size_t count = 0;
    std::vector<std::size_t> nodes;
    std::vector<double> weights;
  };
  void stencil(const ProductBelief& pi, Stencil& out) const;

  /// Node with the two agents' axis blocks exchanged. Requires two agents with
  /// equal type counts.
  std::size_t mirror_node(std::size_t node) const;
  /// True for the node that is solved when the mirror image is filled in.
  bool canonical(std::size_t node) const;

  bool operator==(const BeliefGrid& other) const {
    return num_types_ == other.num_types_ && intervals_ == other.intervals_;
  }

 private:
  std::vector<std::size_t> num_types_;
  std::vector<std::size_t> axis_offset_;
  std::vector<std::size_t> stride_;
  std::size_t intervals_ = 1;
  std::size_t axes_ = 0;
  std::size_t size_ = 1;
};

/// Number of grid intervals for a requested step; throws for steps outside
/// (0, 0.5].
std::size_t grid_intervals(double step);

/// Continuation value oracle: fills out[slot(i, x)] with V^i(pi, x) for all
/// agents and own types (slots ordered by agent, then type).
class ValueFunction {
 public:
  virtual ~ValueFunction() = default;
  virtual void evaluate(const ProductBelief& pi, std::span<double> out) const = 0;
};

class ZeroValue final : public ValueFunction {
 public:
  void evaluate(const ProductBelief&, std::span<double> out) const override {
    for (double& v : out) v = 0.0;
  }
};

/// V^i tabulated on a BeliefGrid; off-grid points by multilinear interpolation.
class ValueTable final : public ValueFunction {
 public:
  ValueTable() = default;
  explicit ValueTable(BeliefGrid grid, double fill = 0.0);

  const BeliefGrid& grid() const { return grid_; }
  std::size_t slots() const { return slots_; }
  std::size_t slot(std::size_t agent, std::size_t type) const { return slot_offset_[agent] + type; }

  double at(std::size_t node, std::size_t agent, std::size_t type) const {
    return values_[node * slots_ + slot(agent, type)];
  }
  double& at(std::size_t node, std::size_t agent, std::size_t type) {
    return values_[node * slots_ + slot(agent, type)];
  }
  std::span<const double> node_values(std::size_t node) const {
    return {values_.data() + node * slots_, slots_};
  }
  std::span<double> node_values(std::size_t node) {
    return {values_.data() + node * slots_, slots_};
  }
  const std::vector<double>& raw() const { return values_; }
  std::vector<double>& raw() { return values_; }

  double interpolate(const ProductBelief& pi, std::size_t agent, std::size_t type) const;
  void evaluate(const ProductBelief& pi, std::span<double> out) const override;

  double max_abs() const;
  /// Largest |this - other| over all entries; grids must match.
  double max_abs_difference(const ValueTable& other) const;

 private:
  BeliefGrid grid_;
  std::vector<std::size_t> slot_offset_;
  std::size_t slots_ = 0;
  std::vector<double> values_;
};

struct PointDiagnostics {
  double residual = 0.0;
  int iterations = 0;
  int restarts = 0;
  bool converged = true;
  bool warm_started = false;
};

/// The equilibrium generating function tabulated on grid nodes.
class PolicyGrid {
 public:
  PolicyGrid() = default;
  PolicyGrid(BeliefGrid grid, const GameSpec& spec);

  const BeliefGrid& grid() const { return grid_; }
  std::size_t size() const { return prescriptions_.size(); }

  const Prescription& at(std::size_t node) const { return prescriptions_[node]; }
  Prescription& at(std::size_t node) { return prescriptions_[node]; }
  const PointDiagnostics& diagnostics(std::size_t node) const { return diagnostics_[node]; }
  PointDiagnostics& diagnostics(std::size_t node) { return diagnostics_[node]; }

  /// Prescription at the grid node nearest to pi.
  const Prescription& lookup(const ProductBelief& pi) const {
    return prescriptions_[grid_.nearest_node(pi)];
  }
  /// Stationary PolicyFunction backed by nearest-node lookup.
  PolicyFunction as_function() const;

  std::size_t unconverged_count() const;

 private:
  BeliefGrid grid_;
  std::vector<Prescription> prescriptions_;
  std::vector<PointDiagnostics> diagnostics_;
};

}  // namespace spbe
