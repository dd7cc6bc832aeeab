#include "qmdp/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qmdp/error.hpp"

namespace qmdp {

namespace {

void check_common(const BoundInputs& in, long n) {
  require(n >= 1, "grid size n must be at least 1");
  require(in.d >= 1, "dimension d must be at least 1");
  require(in.alpha_cov >= 0.0 && std::isfinite(in.alpha_cov), "covering coefficient must be finite and >= 0");
}

double inv_root(long n, int d) { return 1.0 / std::pow(static_cast<double>(n), 1.0 / d); }

double discounted_numerator(const BoundInputs& in) {
  require(in.beta > 0.0 && in.beta < 1.0, "beta must lie in (0, 1)");
  require(in.K1 >= 0.0 && in.K2 >= 0.0, "Lipschitz constants must be non-negative");
  if (in.K2 * in.beta >= 1.0)
    fail(ErrorKind::Precondition, "discounted bound needs K2 * beta < 1 (got " + std::to_string(in.K2 * in.beta) + ")");
  const double b = in.beta;
  const double tau = (2.0 + b) * b * in.K2 + (b * b + 4.0 * b + 2.0) / ((1.0 - b) * (1.0 - b));
  const double bracket = tau * in.K1 / (1.0 - b * in.K2) + 2.0 * in.K1 / (1.0 - b);
  return bracket / (1.0 - b) * 2.0 * in.alpha_cov;
}

}  // namespace

double discounted_rate_bound(const BoundInputs& in, long n) {
  check_common(in, n);
  // Divide rather than multiply by (1/n)^(1/d) so the d = 1 case is exactly numerator / n.
  return discounted_numerator(in) / std::pow(static_cast<double>(n), 1.0 / in.d);
}

double average_rate_bound_modulus(const BoundInputs& in, long n, long t) {
  check_common(in, n);
  require(static_cast<bool>(in.omega_c) && static_cast<bool>(in.omega_p),
          "average bound needs both moduli omega_c and omega_p");
  require(t >= 0, "t must be non-negative");
  require(in.kappa > 0.0 && in.kappa < 1.0, "kappa must lie in (0, 1)");
  const double dn = 2.0 * in.alpha_cov * inv_root(n, in.d);
  return 4.0 * in.c_sup * in.R * std::pow(in.kappa, static_cast<double>(t)) + 2.0 * in.omega_c(dn) +
         2.0 * in.c_sup * static_cast<double>(t) * in.omega_p(dn);
}

AverageBound average_rate_bound_lipschitz(const BoundInputs& in, long n) {
  check_common(in, n);
  require(in.kappa > 0.0 && in.kappa < 1.0, "kappa must lie in (0, 1)");
  require(in.c_sup > 0.0 && in.R > 0.0, "c_sup and R must be positive");
  require(in.K1 >= 0.0, "K1 must be non-negative");
  if (!(in.K2 > 0.0 && in.alpha_cov > 0.0))
    fail(ErrorKind::Precondition, "Lipschitz average bound needs K2 > 0 and alpha > 0");
  const double log_inv_kappa = std::log(1.0 / in.kappa);
  const double i1 = 4.0 * in.c_sup * in.R;
  const double i2 = 4.0 * in.K1 * in.alpha_cov;
  const double i3 = 4.0 * in.c_sup * in.K2 * in.alpha_cov;
  const double i4 = i3 / (i1 * log_inv_kappa);
  const double root = std::pow(static_cast<double>(n), 1.0 / in.d);
  const double scale = 1.0 / root;

  AverageBound out;
  out.t_prime = std::log(root / i4) / log_inv_kappa;
  if (out.t_prime < 1.0) {
    BoundInputs lin = in;
    lin.omega_c = [k = in.K1](double r) { return k * r; };
    lin.omega_p = [k = in.K2](double r) { return k * r; };
    out.value = average_rate_bound_modulus(lin, n, 1);
    out.pre_asymptotic = true;
    return out;
  }
  out.value = (i1 * i4 + i2) * scale + i3 / log_inv_kappa * scale * std::log(root / i4);
  return out;
}

double unit_ball_volume(int d) {
  require(d >= 0, "dimension must be non-negative");
  double even = 1.0;  // V_0
  double odd = 2.0;   // V_1
  for (int k = 2; k <= d; ++k) {
    if (k % 2 == 0)
      even *= 2.0 * std::numbers::pi / k;
    else
      odd *= 2.0 * std::numbers::pi / k;
  }
  return d % 2 == 0 ? even : odd;
}

double slb_constant(int d, double h_g) {
  require(d >= 1, "dimension d must be at least 1");
  require(std::isfinite(h_g), "noise entropy must be finite");
  double gamma_d = 1.0;  // (d - 1)!
  for (int k = 2; k < d; ++k) gamma_d *= k;
  const double dd = static_cast<double>(d);
  return dd / 2.0 * std::pow(std::exp2(h_g) / (dd * unit_ball_volume(d) * gamma_d), 1.0 / dd);
}

double slb_floor(int d, double h_g, long n) {
  require(n >= 1, "grid size n must be at least 1");
  return slb_constant(d, h_g) / std::pow(static_cast<double>(n), 1.0 / d);
}

double slb_floor_discounted(int d, double h_g, long n, double beta) {
  require(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
  require(n >= 1, "grid size n must be at least 1");
  return slb_constant(d, h_g) / (1.0 - beta) / std::pow(static_cast<double>(n), 1.0 / d);
}

long grid_size_for_epsilon(const BoundInputs& in, double eps) {
  require(eps > 0.0 && std::isfinite(eps), "eps must be positive");
  const double b1 = discounted_rate_bound(in, 1);
  if (b1 <= eps) return 1;
  const double guess = std::ceil(std::pow(b1 / eps, static_cast<double>(in.d)));
  if (!(guess < 1e15)) fail(ErrorKind::Input, "eps too small: required grid size exceeds 1e15");
  long n = std::max(1L, static_cast<long>(guess));
  while (discounted_rate_bound(in, n) > eps) ++n;
  while (n > 1 && discounted_rate_bound(in, n - 1) <= eps) --n;
  return n;
}

}  // namespace qmdp
