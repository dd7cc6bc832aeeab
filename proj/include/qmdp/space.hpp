#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace qmdp {

using State = std::vector<double>;
using Action = std::vector<double>;

/// Axis-aligned box in R^d. For an unbounded model the box only describes the
/// truncation currently in use.
struct BoxSpace {
  std::vector<double> lo;
  std::vector<double> hi;
  bool unbounded = false;

  BoxSpace() = default;
  BoxSpace(std::vector<double> lo_, std::vector<double> hi_, bool unbounded_ = false);
  static BoxSpace interval(double lo, double hi, bool unbounded = false) {
    return BoxSpace({lo}, {hi}, unbounded);
  }

  std::size_t dim() const noexcept { return lo.size(); }
  bool contains(std::span<const double> z, double slack = 0.0) const noexcept;
  bool strictly_inside(const BoxSpace& outer) const noexcept;
  std::string describe() const;
};

double distance(std::span<const double> x, std::span<const double> y) noexcept;

}  // namespace qmdp
