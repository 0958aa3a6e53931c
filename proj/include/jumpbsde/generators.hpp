#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jumpbsde/levy_model.hpp"

namespace jumpbsde {

/// Modulus rho in the monotonicity condition: nondecreasing, continuous, concave, rho(0) = 0.
struct RhoFunction {
  std::function<double(double)> value;
  std::string description;

  double operator()(double x) const { return value(x); }

  static RhoFunction identity();
  /// sqrt(x). Usable for the Bihari engine; it violates limsup rho(x^2)/x = 0.
  static RhoFunction square_root();
  /// 1 - min(x, 1/e)^min(x, 1/e).
  static RhoFunction one_minus_power();

  /// Lookup by name: "id", "sqrt", "one_minus_power". Throws std::invalid_argument.
  static RhoFunction by_name(const std::string& name);
};

using CoefficientFn = std::function<double(const PathContext&, double t)>;

/// Coefficients declared for the growth and monotonicity conditions.
struct Coefficients {
  CoefficientFn F;
  CoefficientFn K1;
  CoefficientFn K2;
  CoefficientFn beta;
  std::function<double(double t)> alpha;
  RhoFunction rho;
};

/// Which conditions the author of a generator claims it satisfies.
struct ConditionFlags {
  bool satisfies_A2 = true;
  bool satisfies_A3 = true;
  bool satisfies_A4 = true;
  bool satisfies_A_gamma = true;
};

using GeneratorFn =
    std::function<double(const PathContext&, double t, double y, double z, const JumpVector& u)>;

/// A generator f(omega, t, y, z, u) together with its declared coefficients.
/// Evaluation must not mutate anything; specs are shared freely between solvers.
struct GeneratorSpec {
  std::string name;
  GeneratorFn eval;
  Coefficients coeffs;
  ConditionFlags flags;

  double operator()(const PathContext& ctx, double t, double y, double z, const JumpVector& u) const {
    return eval(ctx, t, y, z, u);
  }
};

/// c_n(z) = min(max(-n, z), n).
double clamp(double z, int n);

/// Radial projection of u onto the L^2(nu) ball of radius n. Returns u itself when ||u|| <= n.
JumpVector project_ball(const JumpVector& u, int n, const LevyModel& model);

/// Truncated generator f^(n) built from c_n, the ball projection and the capped coefficients.
GeneratorSpec truncate_generator(const GeneratorSpec& g, int n);

/// Upper bound F + K1 |y| + K2 (|z| + ||u||) declared by g at one point.
double growth_bound(const GeneratorSpec& g, const PathContext& ctx, double t, double y, double z,
                    const JumpVector& u);

/// g + constant; F grows by |constant|.
GeneratorSpec shifted(const GeneratorSpec& g, double constant);

// ---------------------------------------------------------------------------
// Sampling-based condition checks.

struct SamplerConfig {
  std::size_t samples = 2000;
  double horizon = 1.0;
  double y_box = 5.0;
  double z_box = 5.0;
  double u_scale = 2.0;
  double x_box = 3.0;
  int max_count = 3;
  std::uint64_t seed = 7;
  double slack = 1e-12;
};

/// Point at which a check failed, with the two sides of the inequality.
struct Witness {
  double t = 0.0;
  double y = 0.0, z = 0.0;
  std::vector<double> u;
  double y2 = 0.0, z2 = 0.0;
  std::vector<double> u2;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct ConditionReport {
  std::string condition;
  bool passed = true;
  std::size_t points_checked = 0;
  /// max(lhs - rhs) over all checked points.
  double max_excess = -std::numeric_limits<double>::infinity();
  std::optional<Witness> witness;
  std::string note;
};

/// (A2): |f| <= F + K1|y| + K2(|z| + ||u||).
ConditionReport check_growth(const GeneratorSpec& g, const LevyModel& model, const SamplerConfig& cfg);

/// (A3): (y - y')(f - f') <= alpha rho(|y - y'|^2) + beta |y - y'| (|z - z'| + ||u - u'||).
ConditionReport check_monotonicity(const GeneratorSpec& g, const LevyModel& model,
                                   const SamplerConfig& cfg);

/// (A gamma): f(u) - f(u') <= sum_j lambda_j (u'_j - u_j) for u <= u' componentwise.
ConditionReport check_a_gamma(const GeneratorSpec& g, const LevyModel& model, const SamplerConfig& cfg);

/// f <= f' on sampled points (comparison hypothesis).
ConditionReport check_dominated(const GeneratorSpec& lower, const GeneratorSpec& upper,
                                const LevyModel& model, const SamplerConfig& cfg);

/// rho(0) = 0, monotone, midpoint-concave on a grid, and rho(x^2)/x on x = 2^-k (for (A4)).
/// The (A4) part is a finite-grid indication only.
ConditionReport check_rho(const RhoFunction& rho, bool require_a4);

// ---------------------------------------------------------------------------
// Catalog.

struct GeneratorParams {
  double k = 1.0;
  double a = 0.0;
  double b = 0.0;
  /// Either one coefficient for all marks or one per mark.
  std::vector<double> c{};
  double offset = 0.0;
};

using GeneratorFactory = std::function<GeneratorSpec(const GeneratorParams&)>;

/// Named generators: zero, linear_y, linear, intro_example, a_gamma_violator, a_gamma_boundary.
const std::map<std::string, GeneratorFactory>& builtin_generators();

/// Catalog lookup; applies params.offset. Throws std::invalid_argument for unknown names.
GeneratorSpec make_generator(const std::string& name, const GeneratorParams& params = {});

/// kappa(s, x) = s^(-1/4) (|x| ^ 1) for s > 0 and 0 at s = 0.
double intro_kappa(double s, double x);

}  // namespace jumpbsde
