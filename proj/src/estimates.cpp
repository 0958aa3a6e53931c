#include "jumpbsde/estimates.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace jumpbsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double integrate(const std::function<double(double)>& f, double a, double b) {
  if (a == b) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-13);
}

void require_nonnegative(double v, const char* what) {
  if (!(v >= 0.0) || std::isnan(v)) throw std::invalid_argument(std::string(what) + " must be >= 0");
}

}  // namespace

PiecewiseConstantRate::PiecewiseConstantRate(std::vector<double> breaks, std::vector<double> values)
    : breaks_(std::move(breaks)), values_(std::move(values)) {
  if (values_.empty() || breaks_.size() != values_.size() + 1)
    throw std::invalid_argument("rate table needs one more break than values");
  for (std::size_t k = 0; k + 1 < breaks_.size(); ++k)
    if (!(breaks_[k] < breaks_[k + 1])) throw std::invalid_argument("rate breaks must be strictly increasing");
  for (double v : values_)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("rate values must be finite and >= 0");
}

PiecewiseConstantRate PiecewiseConstantRate::constant(double value, double t0, double t1) {
  return PiecewiseConstantRate({t0, t1}, {value});
}

double PiecewiseConstantRate::operator()(double s) const {
  if (s < breaks_.front()) return values_.front();
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), s);
  const std::size_t k = static_cast<std::size_t>(it - breaks_.begin()) - 1;
  return values_[std::min(k, values_.size() - 1)];
}

double PiecewiseConstantRate::integral(double a, double b) const {
  if (b < a) return -integral(b, a);
  double total = 0.0;
  // extensions beyond the table
  if (a < breaks_.front()) total += values_.front() * (std::min(b, breaks_.front()) - a);
  if (b > breaks_.back()) total += values_.back() * (b - std::max(a, breaks_.back()));
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const double lo = std::max(a, breaks_[k]);
    const double hi = std::min(b, breaks_[k + 1]);
    if (hi > lo) total += values_[k] * (hi - lo);
  }
  return total;
}

double bihari_G(const RhoFunction& rho, double x) {
  if (!(x > 0.0)) throw std::invalid_argument("G is defined on (0, inf)");
  if (x == 1.0) return 0.0;
  // r = e^s: dr / rho(r) = e^s / rho(e^s) ds
  auto integrand = [&](double s) {
    const double r = std::exp(s);
    const double p = rho(r);
    if (!(p > 0.0)) throw std::invalid_argument("rho must be > 0 on (0, inf)");
    return r / p;
  };
  return integrate(integrand, 0.0, std::log(x));
}

double bihari_G_inverse(const RhoFunction& rho, double target, double lower) {
  if (!(lower > 0.0)) throw std::invalid_argument("lower bracket must be > 0");
  double lo = lower;
  if (bihari_G(rho, lo) >= target) return lo;
  double hi = 2.0 * lo;
  while (bihari_G(rho, hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return kInf;
  }
  for (int it = 0; it < 200 && hi > lo * (1.0 + 4.0 * std::numeric_limits<double>::epsilon()); ++it) {
    const double mid = std::sqrt(lo) * std::sqrt(hi);
    if (bihari_G(rho, mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

BihariResult bihari_from_integral(double c, double integral_K, const RhoFunction& rho) {
  BihariResult r;
  r.integral_K = integral_K;
  r.G_of_c = bihari_G(rho, c);
  if (integral_K == 0.0) {
    r.bound = c;
    return r;
  }
  r.bound = bihari_G_inverse(rho, r.G_of_c + integral_K, c);
  r.in_domain = std::isfinite(r.bound);
  return r;
}

void check_interval(double c, double t, double T) {
  if (!(c > 0.0)) throw std::invalid_argument("Bihari constant c must be > 0");
  if (!(t <= T)) throw std::invalid_argument("need t <= T");
}

}  // namespace

BihariResult bihari_bound(double c, const PiecewiseConstantRate& K, const RhoFunction& rho, double t, double T) {
  check_interval(c, t, T);
  return bihari_from_integral(c, K.integral(t, T), rho);
}

BihariResult bihari_bound(double c, const std::function<double(double)>& K, const RhoFunction& rho, double t,
                          double T) {
  check_interval(c, t, T);
  constexpr int samples = 1000;
  for (int k = 0; k <= samples; ++k) {
    const double s = t + (T - t) * k / samples;
    if (K(s) < 0.0) throw std::invalid_argument("rate K takes a negative value at s = " + std::to_string(s));
  }
  return bihari_from_integral(c, integrate(K, t, T), rho);
}

double gronwall_bound(double c, double integral_K) { return c * std::exp(integral_K); }

AprioriBound apriori_bound(double C_K, double e_xi2, double e_IF2) {
  require_nonnegative(C_K, "C_K");
  require_nonnegative(e_xi2, "E|xi|^2");
  require_nonnegative(e_IF2, "E I_F^2");
  AprioriBound b;
  b.c1 = (5.0 + C_K) * std::exp((5.0 + C_K) * C_K);
  const double e4 = std::exp(4.0 * C_K);
  const double e8 = std::exp(8.0 * C_K);
  const double sup_xi = 2.0 * b.c1 + 48.0 * b.c1 * e4;
  const double sup_if = 2.0 * b.c1 + (48.0 * b.c1) * (48.0 * b.c1) * e8;
  const double zu_xi = 1.0 / 12.0 + 4.0 * e4;
  const double zu_if = 1.0 / 12.0 + 192.0 * b.c1 * e8;
  b.sup_Y_bound = sup_xi * e_xi2 + sup_if * e_IF2;
  b.ZU_bound = zu_xi * e_xi2 + zu_if * e_IF2;
  b.C1 = std::log(std::max(sup_xi + zu_xi, sup_if + zu_if)) / ((1.0 + C_K) * (1.0 + C_K));
  return b;
}

double stability_bound(double a, double b, double delta, const RhoFunction& rho) {
  require_nonnegative(a, "a");
  require_nonnegative(b, "b");
  require_nonnegative(delta, "delta");
  if (delta == 0.0) return 0.0;
  const double e = std::exp(4.0 * b);
  const double start = e * delta;
  const double H = a == 0.0 ? start : bihari_G_inverse(rho, bihari_G(rho, start) + 2.0 * e * a, start);
  if (!std::isfinite(H)) return kInf;
  return 2.0 * e * delta + (2.0 * e * a + 1.0) * (H + rho(H));
}

double weighted_y_bound(double intH_xi2, double intH_IF_norm, double Y_s2_norm, double C_K) {
  require_nonnegative(intH_xi2, "int H |xi|^2");
  require_nonnegative(intH_IF_norm, "||int H I_F||");
  require_nonnegative(Y_s2_norm, "||Y||");
  require_nonnegative(C_K, "C_K");
  const double e = std::exp(2.0 * C_K);
  return e * intH_xi2 + 2.0 * e * intH_IF_norm * Y_s2_norm;
}

}  // namespace jumpbsde
