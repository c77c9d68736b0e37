#include "spbe/belief_grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spbe {

std::size_t grid_intervals(double step) {
  if (!(step > 0.0 && step <= 0.5)) {
    throw std::invalid_argument("grid step must lie in (0, 0.5]");
  }
  const double n = 1.0 / step;
  const double rounded = std::round(n);
  // A step that does not divide one is widened to the next divisor.
  return static_cast<std::size_t>(std::abs(n - rounded) < 1e-9 ? rounded : std::ceil(n));
}

BeliefGrid::BeliefGrid(const GameSpec& spec, double step)
    : BeliefGrid(
          [&] {
            std::vector<std::size_t> nt;
            for (std::size_t i = 0; i < spec.agents(); ++i) nt.push_back(spec.num_types(i));
            return nt;
          }(),
          grid_intervals(step)) {}

BeliefGrid::BeliefGrid(std::vector<std::size_t> num_types, std::size_t intervals)
    : num_types_(std::move(num_types)), intervals_(intervals) {
  if (intervals_ == 0) throw std::invalid_argument("BeliefGrid: zero intervals");
  axes_ = 0;
  for (std::size_t nt : num_types_) {
    if (nt == 0) throw std::invalid_argument("BeliefGrid: empty type set");
    axis_offset_.push_back(axes_);
    axes_ += nt - 1;
  }
  if (axes_ > kMaxAxes) throw std::invalid_argument("BeliefGrid: too many belief axes");
  stride_.assign(axes_, 1);
  size_ = 1;
  for (std::size_t d = axes_; d-- > 0;) {
    stride_[d] = size_;
    size_ *= points_per_axis();
  }
}

ProductBelief BeliefGrid::belief_at(std::size_t node) const {
  ProductBelief pi;
  pi.marginals.reserve(agents());
  for (std::size_t i = 0; i < agents(); ++i) {
    const std::size_t nt = num_types_[i];
    std::vector<double> m(nt, 0.0);
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < nt; ++k) {
      m[k] = axis_value(axis_index(node, axis_offset_[i] + k));
      sum += m[k];
    }
    if (sum <= 1.0 + 1e-12) {
      m[nt - 1] = std::max(0.0, 1.0 - sum);
    } else {
      for (std::size_t k = 0; k + 1 < nt; ++k) m[k] /= sum;
    }
    pi.marginals.push_back(std::move(m));
  }
  return pi;
}

bool BeliefGrid::feasible(std::size_t node) const {
  for (std::size_t i = 0; i < agents(); ++i) {
    std::size_t sum = 0;
    for (std::size_t k = 0; k + 1 < num_types_[i]; ++k) {
      sum += axis_index(node, axis_offset_[i] + k);
    }
    if (sum > intervals_) return false;
  }
  return true;
}

std::size_t BeliefGrid::nearest_node(const ProductBelief& pi) const {
  std::size_t node = 0;
  const double n = static_cast<double>(intervals_);
  for (std::size_t i = 0; i < agents(); ++i) {
    for (std::size_t k = 0; k + 1 < num_types_[i]; ++k) {
      const double c = std::clamp(pi[i][k], 0.0, 1.0);
      const auto idx = static_cast<std::size_t>(std::llround(c * n));
      node += std::min(idx, intervals_) * stride_[axis_offset_[i] + k];
    }
  }
  return node;
}

void BeliefGrid::stencil(const ProductBelief& pi, Stencil& out) const {
  std::array<std::size_t, kMaxAxes> base{};
  std::array<double, kMaxAxes> frac{};
  const double n = static_cast<double>(intervals_);
  for (std::size_t i = 0; i < agents(); ++i) {
    for (std::size_t k = 0; k + 1 < num_types_[i]; ++k) {
      const std::size_t d = axis_offset_[i] + k;
      double pos = std::clamp(pi[i][k], 0.0, 1.0) * n;
      const double nearest = std::round(pos);
      if (std::abs(pos - nearest) < 1e-9) pos = nearest;
      auto lo = static_cast<std::size_t>(std::floor(pos));
      if (lo >= intervals_) lo = intervals_ - 1;
      base[d] = lo;
      frac[d] = std::clamp(pos - static_cast<double>(lo), 0.0, 1.0);
    }
  }
  const std::size_t corners = std::size_t{1} << axes_;
  out.nodes.resize(corners);
  out.weights.resize(corners);
  out.count = 0;
  for (std::size_t mask = 0; mask < corners; ++mask) {
    double w = 1.0;
    std::size_t node = 0;
    for (std::size_t d = 0; d < axes_; ++d) {
      const bool upper = (mask >> (axes_ - 1 - d)) & 1U;
      w *= upper ? frac[d] : 1.0 - frac[d];
      node += (base[d] + (upper ? 1 : 0)) * stride_[d];
    }
    if (w == 0.0) continue;
    out.nodes[out.count] = node;
    out.weights[out.count] = w;
    ++out.count;
  }
}

std::size_t BeliefGrid::mirror_node(std::size_t node) const {
  if (agents() != 2 || num_types_[0] != num_types_[1]) {
    throw std::logic_error("mirror_node requires two agents with equal type counts");
  }
  const std::size_t per_agent = num_types_[0] - 1;
  std::size_t out = 0;
  for (std::size_t k = 0; k < per_agent; ++k) {
    out += axis_index(node, per_agent + k) * stride_[k];
    out += axis_index(node, k) * stride_[per_agent + k];
  }
  return out;
}

bool BeliefGrid::canonical(std::size_t node) const { return mirror_node(node) <= node; }

ValueTable::ValueTable(BeliefGrid grid, double fill) : grid_(std::move(grid)) {
  slots_ = 0;
  for (std::size_t i = 0; i < grid_.agents(); ++i) {
    slot_offset_.push_back(slots_);
    slots_ += grid_.num_types(i);
  }
  values_.assign(grid_.size() * slots_, fill);
}

double ValueTable::interpolate(const ProductBelief& pi, std::size_t agent,
                               std::size_t type) const {
  thread_local BeliefGrid::Stencil st;
  grid_.stencil(pi, st);
  const std::size_t s = slot(agent, type);
  double v = 0.0;
  for (std::size_t c = 0; c < st.count; ++c) v += st.weights[c] * values_[st.nodes[c] * slots_ + s];
  return v;
}

void ValueTable::evaluate(const ProductBelief& pi, std::span<double> out) const {
  thread_local BeliefGrid::Stencil st;
  grid_.stencil(pi, st);
  for (std::size_t s = 0; s < slots_; ++s) out[s] = 0.0;
  for (std::size_t c = 0; c < st.count; ++c) {
    const double w = st.weights[c];
    const double* row = values_.data() + st.nodes[c] * slots_;
    for (std::size_t s = 0; s < slots_; ++s) out[s] += w * row[s];
  }
}

double ValueTable::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double ValueTable::max_abs_difference(const ValueTable& other) const {
  if (!(grid_ == other.grid_) || values_.size() != other.values_.size()) {
    throw std::invalid_argument("max_abs_difference: grids differ");
  }
  double m = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    m = std::max(m, std::abs(values_[k] - other.values_[k]));
  }
  return m;
}

PolicyGrid::PolicyGrid(BeliefGrid grid, const GameSpec& spec)
    : grid_(std::move(grid)),
      prescriptions_(grid_.size(), Prescription::uniform(spec)),
      diagnostics_(grid_.size()) {}

PolicyFunction PolicyGrid::as_function() const {
  return [this](const ProductBelief& pi, std::size_t) -> const Prescription& {
    return lookup(pi);
  };
}

std::size_t PolicyGrid::unconverged_count() const {
  return static_cast<std::size_t>(
      std::count_if(diagnostics_.begin(), diagnostics_.end(),
                    [](const PointDiagnostics& d) { return !d.converged; }));
}

}  // namespace spbe
