#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "qmdp/space.hpp"

namespace qmdp {

/// Nearest-neighbour quantizer over a finite set of grid points.
///
/// Points produced by the grid builders form a cartesian product of per-axis
/// coordinates (row-major, last axis fastest). Such grids answer `quantize`
/// axis by axis; arbitrary point sets fall back to a linear scan. Ties always
/// go to the smallest index.
class Quantizer {
 public:
  Quantizer() = default;
  /// Arbitrary point set (no cartesian structure).
  Quantizer(std::vector<State> points, BoxSpace space);
  /// Cartesian grid given by per-axis sorted coordinates.
  Quantizer(std::vector<std::vector<double>> axes, BoxSpace space, double covering_radius);

  std::size_t size() const noexcept { return points_.size(); }
  std::size_t dim() const noexcept { return space_.dim(); }
  const std::vector<State>& points() const noexcept { return points_; }
  const State& point(std::size_t i) const { return points_.at(i); }
  const BoxSpace& space() const noexcept { return space_; }
  double covering_radius() const noexcept { return covering_radius_; }

  bool is_cartesian() const noexcept { return !axes_.empty(); }
  const std::vector<std::vector<double>>& axes() const noexcept { return axes_; }

  /// Index of the nearest point; total on R^d.
  std::size_t quantize(std::span<const double> z) const;

  /// Flat index from per-axis indices (cartesian grids only).
  std::size_t flat_index(std::span<const std::size_t> axis_index) const;

  /// Upper bound on the covering radius measured on a probe lattice with
  /// `per_dim` points per axis spanning the space.
  double probe_covering_radius(std::size_t per_dim) const;

  std::string describe() const;

 private:
  std::vector<State> points_;
  std::vector<std::vector<double>> axes_;
  BoxSpace space_;
  double covering_radius_ = 0.0;
};

/// Cell-centred uniform grid with `n_per_dim` points per axis.
Quantizer build_uniform_grid(const BoxSpace& space, std::size_t n_per_dim);

/// Action grid; same mechanics as the state grid.
Quantizer build_action_grid(const BoxSpace& space, std::size_t k_per_dim);

/// Axis index of the nearest coordinate in a sorted list, ties to the lower index.
std::size_t nearest_on_axis(std::span<const double> axis, double z) noexcept;

/// How the per-cell weighting measures are chosen when averaging the cost and
/// kernel over a quantization cell.
struct WeightingSpec {
  enum class Kind { UniformOnCell, PointMass, Mixture };
  Kind kind = Kind::PointMass;
  // Mixture: nu = w * (normalized Lebesgue on the grid region) + (1 - w) * (outside atom).
  double mixture_weight = 0.5;

  static WeightingSpec uniform_on_cell() { return {Kind::UniformOnCell, 1.0}; }
  static WeightingSpec point_mass() { return {Kind::PointMass, 0.0}; }
  static WeightingSpec mixture(double w) { return {Kind::Mixture, w}; }

  void validate() const;
  std::string describe() const;
};

WeightingSpec::Kind parse_weighting_kind(const std::string& s);

}  // namespace qmdp
