#include "qmdp/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "qmdp/error.hpp"

namespace qmdp {

QuadratureRule gauss_legendre(std::size_t m) {
  require(m >= 1, "gauss-legendre needs at least one node");
  QuadratureRule rule;
  rule.nodes.assign(m, 0.0);
  rule.weights.assign(m, 0.0);
  const double n = static_cast<double>(m);
  const std::size_t half = (m + 1) / 2;
  for (std::size_t i = 1; i <= half; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) - 0.25) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Three-term recurrence for P_m(z); pp is P_m'(z).
      double p1 = 1.0;
      double p2 = 0.0;
      for (std::size_t j = 1; j <= m; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jj = static_cast<double>(j);
        p1 = ((2.0 * jj - 1.0) * z * p2 - (jj - 1.0) * p3) / jj;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    if (m % 2 == 1 && i == half) z = 0.0;  // middle node of an odd rule
    // Recompute the derivative at the final node for the weight.
    double p1 = 1.0;
    double p2 = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      const double p3 = p2;
      p2 = p1;
      const double jj = static_cast<double>(j);
      p1 = ((2.0 * jj - 1.0) * z * p2 - (jj - 1.0) * p3) / jj;
    }
    pp = n * (z * p1 - p2) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.nodes[i - 1] = -z;
    rule.nodes[m - i] = z;
    rule.weights[i - 1] = w;
    rule.weights[m - i] = w;
  }
  return rule;
}

}  // namespace qmdp
