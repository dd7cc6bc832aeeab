#pragma once

#include <cstddef>
#include <optional>

#include "qmdp/model.hpp"
#include "qmdp/quantizer.hpp"

namespace qmdp {

/// Truncation K_n of an unbounded state space. The finite model gets one extra
/// pseudo-state, appended after the grid, standing for everything outside K_n.
struct Compactification {
  BoxSpace truncation;
  /// Atom of the outside weighting measure; when empty, a point one covering
  /// radius beyond the upper face of K_n is used.
  std::optional<State> outside_point;

  std::size_t pseudo_state_index(const Quantizer& grid) const noexcept { return grid.size(); }
  State resolve_outside_point(const Quantizer& grid) const;
};

/// Nested truncations K_n = [-l_n, l_n]^d with l_n = l0 + slope * n.
struct TruncationSchedule {
  double l0 = 0.5;
  double slope = 0.25;

  double half_width(int step) const;
  void validate() const;
};

Compactification truncation_schedule(const ContinuousMdp& model, const TruncationSchedule& schedule,
                                     int step);

}  // namespace qmdp
