#pragma once

#include <functional>

namespace qmdp {

using Modulus = std::function<double(double)>;

struct BoundInputs {
  double K1 = 0.0;         // cost Lipschitz constant in the state
  double K2 = 0.0;         // kernel Lipschitz constant (Wasserstein-1)
  double beta = 0.0;
  double alpha_cov = 0.0;  // covering coefficient: radius <= alpha (1/n)^(1/d)
  int d = 1;
  double c_sup = 0.0;      // sup-norm of the cost
  double R = 0.0;          // geometric ergodicity constants R kappa^t
  double kappa = 0.0;
  Modulus omega_c;         // optional moduli of continuity
  Modulus omega_p;
};

/// Upper bound on |J(extended policy) - J*| for an n-point grid.
double discounted_rate_bound(const BoundInputs& in, long n);

/// 4 |c| R kappa^t + 2 omega_c(d_n) + 2 |c| t omega_p(d_n), d_n = 2 alpha (1/n)^(1/d).
double average_rate_bound_modulus(const BoundInputs& in, long n, long t);

struct AverageBound {
  double value = 0.0;
  double t_prime = 0.0;
  /// t'(n) < 1: the value is the modulus bound at t = 1 with linear moduli.
  bool pre_asymptotic = false;
};

/// Lipschitz-case average-cost bound with t optimised per n.
AverageBound average_rate_bound_lipschitz(const BoundInputs& in, long n);

/// Order-optimality floor L (1/n)^(1/d); h_g is the noise entropy in bits.
double slb_constant(int d, double h_g);
double slb_floor(int d, double h_g, long n);
/// L / (1 - beta) (1/n)^(1/d), the discounted-cost version.
double slb_floor_discounted(int d, double h_g, long n, double beta);

/// Volume of the unit ball in R^d.
double unit_ball_volume(int d);

/// Smallest n with discounted_rate_bound(in, n) <= eps.
long grid_size_for_epsilon(const BoundInputs& in, double eps);

}  // namespace qmdp
