#pragma once

#include <cstddef>
#include <vector>

namespace qmdp {

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
};

/// m-point Gauss-Legendre rule on [-1, 1], computed by Newton iteration on P_m.
QuadratureRule gauss_legendre(std::size_t m);

}  // namespace qmdp
