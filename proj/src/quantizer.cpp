#include "qmdp/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qmdp/error.hpp"

namespace qmdp {

BoxSpace::BoxSpace(std::vector<double> lo_, std::vector<double> hi_, bool unbounded_)
    : lo(std::move(lo_)), hi(std::move(hi_)), unbounded(unbounded_) {
  require(!lo.empty(), "box space needs dim >= 1");
  require(lo.size() == hi.size(), "box space bounds differ in dimension");
  for (std::size_t j = 0; j < lo.size(); ++j)
    require(lo[j] < hi[j], "box space needs lo < hi in every coordinate");
}

bool BoxSpace::contains(std::span<const double> z, double slack) const noexcept {
  if (z.size() != dim()) return false;
  for (std::size_t j = 0; j < z.size(); ++j)
    if (!(z[j] >= lo[j] - slack && z[j] <= hi[j] + slack)) return false;
  return true;
}

bool BoxSpace::strictly_inside(const BoxSpace& outer) const noexcept {
  if (outer.dim() != dim()) return false;
  for (std::size_t j = 0; j < dim(); ++j)
    if (!(outer.lo[j] < lo[j] && hi[j] < outer.hi[j])) return false;
  return true;
}

std::string BoxSpace::describe() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t j = 0; j < dim(); ++j) os << (j ? "x" : "") << '[' << lo[j] << ',' << hi[j] << ']';
  if (unbounded) os << "(truncated)";
  return os.str();
}

double distance(std::span<const double> x, std::span<const double> y) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - y[j]) * (x[j] - y[j]);
  return std::sqrt(s);
}

std::size_t nearest_on_axis(std::span<const double> axis, double z) noexcept {
  auto it = std::lower_bound(axis.begin(), axis.end(), z);
  if (it == axis.begin()) return 0;
  if (it == axis.end()) return axis.size() - 1;
  const std::size_t k = static_cast<std::size_t>(it - axis.begin());
  // Equal distances resolve to the lower index.
  return (z - axis[k - 1] <= axis[k] - z) ? k - 1 : k;
}

Quantizer::Quantizer(std::vector<State> points, BoxSpace space)
    : points_(std::move(points)), space_(std::move(space)) {
  require(!points_.empty(), "quantizer needs at least one point");
  for (const auto& p : points_) require(p.size() == space_.dim(), "quantizer point dimension mismatch");
  for (std::size_t i = 0; i < points_.size(); ++i)
    for (std::size_t k = i + 1; k < points_.size(); ++k)
      require(points_[i] != points_[k], "quantizer points must be pairwise distinct");
  covering_radius_ = probe_covering_radius(space_.dim() == 1 ? 10001 : (space_.dim() == 2 ? 101 : 11));
}

Quantizer::Quantizer(std::vector<std::vector<double>> axes, BoxSpace space, double covering_radius)
    : axes_(std::move(axes)), space_(std::move(space)), covering_radius_(covering_radius) {
  require(axes_.size() == space_.dim(), "grid axes do not match the space dimension");
  std::size_t total = 1;
  for (const auto& ax : axes_) {
    require(!ax.empty(), "grid axis is empty");
    require(std::is_sorted(ax.begin(), ax.end()) &&
                std::adjacent_find(ax.begin(), ax.end()) == ax.end(),
            "grid axis must be strictly increasing");
    total *= ax.size();
  }
  points_.reserve(total);
  std::vector<std::size_t> idx(axes_.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    State p(axes_.size());
    for (std::size_t j = 0; j < axes_.size(); ++j) p[j] = axes_[j][idx[j]];
    points_.push_back(std::move(p));
    for (std::size_t j = axes_.size(); j-- > 0;) {
      if (++idx[j] < axes_[j].size()) break;
      idx[j] = 0;
    }
  }
}

std::size_t Quantizer::flat_index(std::span<const std::size_t> axis_index) const {
  std::size_t flat = 0;
  for (std::size_t j = 0; j < axes_.size(); ++j) flat = flat * axes_[j].size() + axis_index[j];
  return flat;
}

std::size_t Quantizer::quantize(std::span<const double> z) const {
  if (is_cartesian()) {
    // Squared distance separates by axis, and row-major order makes the
    // per-axis lowest index the lowest flat index among ties.
    std::size_t flat = 0;
    for (std::size_t j = 0; j < axes_.size(); ++j)
      flat = flat * axes_[j].size() + nearest_on_axis(axes_[j], z[j]);
    return flat;
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) d += (z[j] - points_[i][j]) * (z[j] - points_[i][j]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double Quantizer::probe_covering_radius(std::size_t per_dim) const {
  const std::size_t d = space_.dim();
  per_dim = std::max<std::size_t>(per_dim, 2);
  std::size_t total = 1;
  for (std::size_t j = 0; j < d; ++j) total *= per_dim;
  std::vector<std::size_t> idx(d, 0);
  State z(d);
  double worst = 0.0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    for (std::size_t j = 0; j < d; ++j)
      z[j] = space_.lo[j] + (space_.hi[j] - space_.lo[j]) * static_cast<double>(idx[j]) /
                                static_cast<double>(per_dim - 1);
    worst = std::max(worst, distance(z, points_[quantize(z)]));
    for (std::size_t j = d; j-- > 0;) {
      if (++idx[j] < per_dim) break;
      idx[j] = 0;
    }
  }
  return worst;
}

std::string Quantizer::describe() const {
  std::ostringstream os;
  os << size() << " points on " << space_.describe();
  if (is_cartesian()) {
    os << " (";
    for (std::size_t j = 0; j < axes_.size(); ++j) os << (j ? "x" : "") << axes_[j].size();
    os << " cell-centre)";
  }
  return os.str();
}

Quantizer build_uniform_grid(const BoxSpace& space, std::size_t n_per_dim) {
  require(n_per_dim > 0, "grid needs n_per_dim >= 1");
  std::vector<std::vector<double>> axes(space.dim());
  double r2 = 0.0;
  for (std::size_t j = 0; j < space.dim(); ++j) {
    const double width = space.hi[j] - space.lo[j];
    const double h = width / static_cast<double>(n_per_dim);
    axes[j].resize(n_per_dim);
    for (std::size_t i = 0; i < n_per_dim; ++i)
      axes[j][i] = space.lo[j] + (static_cast<double>(i) + 0.5) * h;
    const double half = width / (2.0 * static_cast<double>(n_per_dim));
    r2 += half * half;
  }
  return Quantizer(std::move(axes), space, std::sqrt(r2));
}

Quantizer build_action_grid(const BoxSpace& space, std::size_t k_per_dim) {
  require(k_per_dim > 0, "action grid needs k_per_dim >= 1");
  return build_uniform_grid(space, k_per_dim);
}

void WeightingSpec::validate() const {
  require(mixture_weight >= 0.0 && mixture_weight <= 1.0, "mixture_weight must lie in [0, 1]");
}

std::string WeightingSpec::describe() const {
  switch (kind) {
    case Kind::UniformOnCell: return "uniform-on-cell";
    case Kind::PointMass: return "point-mass";
    case Kind::Mixture: {
      std::ostringstream os;
      os << "mixture(" << mixture_weight << ")";
      return os.str();
    }
  }
  return "?";
}

WeightingSpec::Kind parse_weighting_kind(const std::string& s) {
  if (s == "uniform-on-cell" || s == "uniform") return WeightingSpec::Kind::UniformOnCell;
  if (s == "point-mass" || s == "point") return WeightingSpec::Kind::PointMass;
  if (s == "mixture") return WeightingSpec::Kind::Mixture;
  fail(ErrorKind::Input, "unknown weighting kind '" + s + "'");
}

}  // namespace qmdp
