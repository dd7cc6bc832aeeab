#include "qmdp/compactification.hpp"

#include <cmath>

#include "qmdp/error.hpp"

namespace qmdp {

State Compactification::resolve_outside_point(const Quantizer& grid) const {
  if (outside_point) {
    require(outside_point->size() == truncation.dim(), "outside point has the wrong dimension");
    require(!truncation.contains(*outside_point), "outside point must lie outside the truncation");
    return *outside_point;
  }
  State x(truncation.dim());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = 0.5 * (truncation.lo[j] + truncation.hi[j]);
  x[0] = truncation.hi[0] + grid.covering_radius();
  return x;
}

double TruncationSchedule::half_width(int step) const {
  require(step >= 1, "truncation step must be >= 1");
  return l0 + slope * static_cast<double>(step);
}

void TruncationSchedule::validate() const {
  require(slope > 0.0, "truncation schedule needs a positive slope (nested K_n)");
  require(l0 + slope > 0.0, "truncation schedule must give l_1 > 0");
}

Compactification truncation_schedule(const ContinuousMdp& model, const TruncationSchedule& schedule,
                                     int step) {
  require(model.state_space.unbounded,
          "truncation requested for model '" + model.name + "' whose state space is already bounded");
  schedule.validate();
  const double l = schedule.half_width(step);
  const std::size_t d = model.state_space.dim();
  return Compactification{BoxSpace(std::vector<double>(d, -l), std::vector<double>(d, l), true), std::nullopt};
}

}  // namespace qmdp
