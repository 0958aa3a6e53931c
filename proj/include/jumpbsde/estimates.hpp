#pragma once

#include <functional>
#include <vector>

#include "jumpbsde/generators.hpp"

namespace jumpbsde {

/// K(s) = values[k] on [breaks[k], breaks[k+1]); constant extension outside the table.
class PiecewiseConstantRate {
 public:
  /// breaks has one more entry than values and is strictly increasing; values >= 0.
  PiecewiseConstantRate(std::vector<double> breaks, std::vector<double> values);
  static PiecewiseConstantRate constant(double value, double t0, double t1);

  double operator()(double s) const;
  /// Exact integral over [a, b].
  double integral(double a, double b) const;

  const std::vector<double>& breaks() const { return breaks_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> breaks_;
  std::vector<double> values_;
};

/// G(x) = int_1^x dr / rho(r) (signed). Computed by adaptive Gauss-Kronrod in s = log r.
double bihari_G(const RhoFunction& rho, double x);

/// Smallest x with G(x) >= target, searched upward from `lower` (G(lower) <= target).
/// Returns +infinity when the target lies beyond sup G.
double bihari_G_inverse(const RhoFunction& rho, double target, double lower);

struct BihariResult {
  bool in_domain = true;
  double bound = 0.0;  // +infinity when out of domain
  double G_of_c = 0.0;
  double integral_K = 0.0;
};

/// y(t) <= G^{-1}(G(c) + int_t^T K). Throws std::invalid_argument for c <= 0, t > T, or a
/// negative rate.
BihariResult bihari_bound(double c, const PiecewiseConstantRate& K, const RhoFunction& rho, double t, double T);

/// Same with a general rate function, integrated by adaptive quadrature (and sampled for sign).
BihariResult bihari_bound(double c, const std::function<double(double)>& K, const RhoFunction& rho, double t,
                          double T);

/// Backward Gronwall: c exp(int_t^T K).
double gronwall_bound(double c, double integral_K);

struct AprioriBound {
  double c1 = 0.0;
  double sup_Y_bound = 0.0;  // bound on E sup |Y|^2
  double ZU_bound = 0.0;     // bound on ||Z||^2 + ||U||^2
  /// Smallest C_1 with both bounds <= exp(C_1 (1 + C_K)^2) (E|xi|^2 + E I_F^2).
  double C1 = 0.0;
};

/// Explicit constants: c1 = (5 + C_K) e^{(5 + C_K) C_K},
/// sup_Y = (2 c1 + 48 c1 e^{4 C_K}) E|xi|^2 + (2 c1 + (48 c1)^2 e^{8 C_K}) E I_F^2,
/// ZU = (1/12 + 4 e^{4 C_K}) E|xi|^2 + (1/12 + 192 c1 e^{8 C_K}) E I_F^2.
AprioriBound apriori_bound(double C_K, double e_xi2, double e_IF2);

/// h(a, b, delta) = 2 e^{4b} delta + (2 e^{4b} a + 1) (H + rho(H)),
/// H = G^{-1}(G(e^{4b} delta) + 2 e^{4b} a); 0 at delta = 0, +infinity when H is out of domain.
double stability_bound(double a, double b, double delta, const RhoFunction& rho);

/// e^{2 C_K} intH_xi2 + 2 e^{2 C_K} intH_IF_norm * Y_s2_norm.
double weighted_y_bound(double intH_xi2, double intH_IF_norm, double Y_s2_norm, double C_K);

}  // namespace jumpbsde
