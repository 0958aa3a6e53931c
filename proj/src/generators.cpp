#include "jumpbsde/generators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace jumpbsde {

RhoFunction RhoFunction::identity() {
  return {[](double x) { return x; }, "id"};
}

RhoFunction RhoFunction::square_root() {
  return {[](double x) { return std::sqrt(std::max(x, 0.0)); }, "sqrt"};
}

RhoFunction RhoFunction::one_minus_power() {
  return {[](double x) {
            const double m = std::min(std::max(x, 0.0), std::exp(-1.0));
            if (m == 0.0) return 0.0;
            // 1 - m^m = -expm1(m log m), accurate for small m
            return -std::expm1(m * std::log(m));
          },
          "one_minus_power"};
}

RhoFunction RhoFunction::by_name(const std::string& name) {
  if (name == "id" || name == "identity") return identity();
  if (name == "sqrt") return square_root();
  if (name == "one_minus_power") return one_minus_power();
  throw std::invalid_argument("unknown rho function '" + name + "'");
}

double clamp(double z, int n) { return std::min(std::max(-static_cast<double>(n), z), static_cast<double>(n)); }

JumpVector project_ball(const JumpVector& u, int n, const LevyModel& model) {
  const double norm = levy_norm(u, model);
  if (norm <= n) return u;
  JumpVector out = u;
  const double scale = n / norm;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] *= scale;
  return out;
}

double growth_bound(const GeneratorSpec& g, const PathContext& ctx, double t, double y, double z,
                    const JumpVector& u) {
  return g.coeffs.F(ctx, t) + g.coeffs.K1(ctx, t) * std::abs(y) +
         g.coeffs.K2(ctx, t) * (std::abs(z) + levy_norm(u, *ctx.model));
}

GeneratorSpec truncate_generator(const GeneratorSpec& g, int n) {
  if (n < 1) throw std::invalid_argument("truncation level must be >= 1");
  const double cap_n = n;
  GeneratorSpec out = g;
  out.name = g.name + "^(" + std::to_string(n) + ")";
  out.coeffs.F = [F = g.coeffs.F, cap_n](const PathContext& c, double t) { return std::min(F(c, t), cap_n); };
  out.coeffs.K1 = [K1 = g.coeffs.K1, cap_n](const PathContext& c, double t) { return std::min(K1(c, t), cap_n); };
  out.coeffs.K2 = [K2 = g.coeffs.K2, cap_n](const PathContext& c, double t) { return std::min(K2(c, t), cap_n); };
  out.eval = [g, n, cap_n](const PathContext& ctx, double t, double y, double z, const JumpVector& u) {
    const double zc = clamp(z, n);
    const JumpVector uc = project_ball(u, n, *ctx.model);
    const double value = g.eval(ctx, t, y, zc, uc);
    const double cap = std::min(g.coeffs.F(ctx, t), cap_n) + std::min(g.coeffs.K1(ctx, t), cap_n) * std::abs(y) +
                       std::min(g.coeffs.K2(ctx, t), cap_n) * (std::abs(zc) + levy_norm(uc, *ctx.model));
    if (std::abs(value) > cap) return value > 0.0 ? cap : -cap;
    return value;
  };
  return out;
}

GeneratorSpec shifted(const GeneratorSpec& g, double constant) {
  if (constant == 0.0) return g;
  GeneratorSpec out = g;
  std::ostringstream name;
  name << g.name << (constant > 0 ? "+" : "") << constant;
  out.name = name.str();
  out.eval = [f = g.eval, constant](const PathContext& ctx, double t, double y, double z, const JumpVector& u) {
    return f(ctx, t, y, z, u) + constant;
  };
  out.coeffs.F = [F = g.coeffs.F, constant](const PathContext& c, double t) { return F(c, t) + std::abs(constant); };
  return out;
}

// ---------------------------------------------------------------------------

namespace {

/// Draws contexts and argument tuples; deterministic given the config seed.
class PointSampler {
 public:
  PointSampler(const LevyModel& model, const SamplerConfig& cfg)
      : model_(model), cfg_(cfg), rng_(cfg.seed), counts_(model.mark_count(), 0) {}

  PathContext context() {
    std::uniform_real_distribution<double> box(-cfg_.x_box, cfg_.x_box);
    std::uniform_int_distribution<int> count(0, cfg_.max_count);
    for (int& c : counts_) c = count(rng_);
    return PathContext{&model_, box(rng_), box(rng_), counts_};
  }

  double time() { return std::uniform_real_distribution<double>(0.0, cfg_.horizon)(rng_); }
  double y() { return std::uniform_real_distribution<double>(-cfg_.y_box, cfg_.y_box)(rng_); }
  double z() { return std::uniform_real_distribution<double>(-cfg_.z_box, cfg_.z_box)(rng_); }

  JumpVector u() {
    std::normal_distribution<double> normal(0.0, cfg_.u_scale);
    JumpVector v(model_.mark_count());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = normal(rng_);
    return v;
  }

  /// Componentwise nonnegative increment.
  JumpVector increment() {
    std::normal_distribution<double> normal(0.0, cfg_.u_scale);
    JumpVector v(model_.mark_count());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = std::abs(normal(rng_));
    return v;
  }

  /// Zeros and single-coordinate spikes.
  std::vector<JumpVector> corners() const {
    const std::size_t J = model_.mark_count();
    std::vector<JumpVector> out{JumpVector(J)};
    for (std::size_t j = 0; j < J; ++j)
      for (double s : {3.0 * cfg_.u_scale, -3.0 * cfg_.u_scale}) {
        JumpVector v(J);
        v[j] = s;
        out.push_back(v);
      }
    return out;
  }

 private:
  const LevyModel& model_;
  const SamplerConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<int> counts_;
};

std::vector<double> to_vec(const JumpVector& u) { return {u.begin(), u.end()}; }

void record(ConditionReport& r, double lhs, double rhs, double slack, const Witness& w) {
  ++r.points_checked;
  const double excess = lhs - rhs;
  if (excess > r.max_excess) r.max_excess = excess;
  if (excess > slack && r.passed) {
    r.passed = false;
    Witness copy = w;
    copy.lhs = lhs;
    copy.rhs = rhs;
    r.witness = copy;
  }
}

JumpVector add(const JumpVector& a, const JumpVector& b) {
  JumpVector out = a;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += b[j];
  return out;
}

JumpVector sub(const JumpVector& a, const JumpVector& b) {
  JumpVector out = a;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] -= b[j];
  return out;
}

}  // namespace

ConditionReport check_growth(const GeneratorSpec& g, const LevyModel& model, const SamplerConfig& cfg) {
  ConditionReport r{.condition = "A2"};
  PointSampler s(model, cfg);
  auto check = [&](const PathContext& ctx, double t, double y, double z, const JumpVector& u) {
    const double lhs = std::abs(g(ctx, t, y, z, u));
    const double rhs = growth_bound(g, ctx, t, y, z, u);
    record(r, lhs, rhs, cfg.slack, Witness{.t = t, .y = y, .z = z, .u = to_vec(u)});
  };
  for (const JumpVector& u : s.corners()) {
    const PathContext ctx = s.context();
    const double t = s.time();
    check(ctx, t, 1.0, 0.0, u);
    check(ctx, t, 0.0, 1.0, u);
    check(ctx, t, 0.0, 0.0, u);
  }
  for (std::size_t k = 0; k < cfg.samples; ++k) {
    const PathContext ctx = s.context();
    const double t = s.time(), y = s.y(), z = s.z();
    check(ctx, t, y, z, s.u());
  }
  return r;
}

ConditionReport check_monotonicity(const GeneratorSpec& g, const LevyModel& model,
                                   const SamplerConfig& cfg) {
  ConditionReport r{.condition = "A3"};
  PointSampler s(model, cfg);
  auto check = [&](const PathContext& ctx, double t, double y, double z, const JumpVector& u, double y2,
                   double z2, const JumpVector& u2) {
    const double dy = y - y2;
    const double lhs = dy * (g(ctx, t, y, z, u) - g(ctx, t, y2, z2, u2));
    const double rhs = g.coeffs.alpha(t) * g.coeffs.rho(dy * dy) +
                       g.coeffs.beta(ctx, t) * std::abs(dy) * (std::abs(z - z2) + levy_norm(sub(u, u2), model));
    record(r, lhs, rhs, cfg.slack,
           Witness{.t = t, .y = y, .z = z, .u = to_vec(u), .y2 = y2, .z2 = z2, .u2 = to_vec(u2)});
  };
  const std::vector<JumpVector> corners = s.corners();
  for (const JumpVector& u : corners) {
    const PathContext ctx = s.context();
    const double t = s.time();
    check(ctx, t, 1.0, 0.0, u, 0.0, 0.0, u);
    check(ctx, t, 1.0, 1.0, u, 0.0, 0.0, corners.front());
    check(ctx, t, -1.0, 0.0, corners.front(), 1.0, 2.0, u);
  }
  for (std::size_t k = 0; k < cfg.samples; ++k) {
    const PathContext ctx = s.context();
    const double t = s.time();
    const double y = s.y(), z = s.z();
    const JumpVector u = s.u();
    const double y2 = s.y(), z2 = s.z();
    const JumpVector u2 = s.u();
    check(ctx, t, y, z, u, y2, z2, u2);
    // same (z, u), y-only perturbation
    check(ctx, t, y, z, u, y2, z, u);
  }
  return r;
}

ConditionReport check_a_gamma(const GeneratorSpec& g, const LevyModel& model, const SamplerConfig& cfg) {
  ConditionReport r{.condition = "A_gamma"};
  PointSampler s(model, cfg);
  auto check = [&](const PathContext& ctx, double t, double y, double z, const JumpVector& u,
                   const JumpVector& u2) {
    const double lhs = g(ctx, t, y, z, u) - g(ctx, t, y, z, u2);
    double rhs = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) rhs += model.marks()[j].intensity * (u2[j] - u[j]);
    record(r, lhs, rhs, cfg.slack,
           Witness{.t = t, .y = y, .z = z, .u = to_vec(u), .y2 = y, .z2 = z, .u2 = to_vec(u2)});
  };
  const std::size_t J = model.mark_count();
  for (std::size_t j = 0; j < J; ++j) {
    const PathContext ctx = s.context();
    const double t = s.time();
    JumpVector spike(J);
    spike[j] = 3.0 * cfg.u_scale;
    check(ctx, t, 0.0, 0.0, JumpVector(J), spike);
    check(ctx, t, 1.0, 1.0, sub(JumpVector(J), spike), JumpVector(J));
  }
  for (std::size_t k = 0; k < cfg.samples; ++k) {
    const PathContext ctx = s.context();
    const double t = s.time(), y = s.y(), z = s.z();
    const JumpVector u = s.u();
    check(ctx, t, y, z, u, add(u, s.increment()));
  }
  if (J == 0) r.note = "no jump marks: condition holds trivially";
  return r;
}

ConditionReport check_dominated(const GeneratorSpec& lower, const GeneratorSpec& upper,
                                const LevyModel& model, const SamplerConfig& cfg) {
  ConditionReport r{.condition = "f<=f'"};
  PointSampler s(model, cfg);
  auto check = [&](const PathContext& ctx, double t, double y, double z, const JumpVector& u) {
    record(r, lower(ctx, t, y, z, u), upper(ctx, t, y, z, u), cfg.slack,
           Witness{.t = t, .y = y, .z = z, .u = to_vec(u)});
  };
  for (const JumpVector& u : s.corners()) {
    const PathContext ctx = s.context();
    check(ctx, s.time(), 0.0, 0.0, u);
  }
  for (std::size_t k = 0; k < cfg.samples; ++k) {
    const PathContext ctx = s.context();
    const double t = s.time(), y = s.y(), z = s.z();
    check(ctx, t, y, z, s.u());
  }
  return r;
}

ConditionReport check_rho(const RhoFunction& rho, bool require_a4) {
  ConditionReport r{.condition = require_a4 ? "rho+A4" : "rho"};
  const double slack = 1e-12;
  auto fail = [&](double x, double lhs, double rhs, const std::string& what) {
    Witness w{.y = x, .lhs = lhs, .rhs = rhs};
    record(r, lhs, rhs, slack, w);
    if (!r.passed && r.note.empty()) r.note = what;
  };
  fail(0.0, std::abs(rho(0.0)), 0.0, "rho(0) != 0");
  std::vector<double> grid;
  for (int k = -40; k <= 20; ++k) grid.push_back(std::ldexp(1.0, k));
  for (int k = 1; k <= 400; ++k) grid.push_back(k * 0.01);
  std::sort(grid.begin(), grid.end());
  for (std::size_t i = 1; i < grid.size(); ++i) fail(grid[i], rho(grid[i - 1]), rho(grid[i]), "rho decreasing");
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t k = i + 1; k < grid.size(); k += 7) {
      const double a = grid[i], b = grid[k];
      // midpoint concavity: (rho(a) + rho(b)) / 2 <= rho((a + b) / 2)
      fail(0.5 * (a + b), 0.5 * (rho(a) + rho(b)), rho(0.5 * (a + b)) + 1e-14 * rho(b), "rho not concave");
    }
  if (require_a4) {
    // rho(x^2)/x along x = 2^-k should tend to 0; a finite grid cannot certify the limsup.
    double last = 0.0;
    for (int k = 10; k <= 60; ++k) {
      const double x = std::ldexp(1.0, -k);
      last = rho(x * x) / x;
    }
    std::ostringstream note;
    note << "rho(x^2)/x at x = 2^-60 is " << last << " (grid indication, not a proof)";
    if (last > 1e-6) {
      r.passed = false;
      r.witness = Witness{.y = std::ldexp(1.0, -60), .lhs = last, .rhs = 0.0};
    }
    if (r.note.empty()) r.note = note.str();
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

CoefficientFn constant_coeff(double v) {
  return [v](const PathContext&, double) { return v; };
}

double coefficient_for(const std::vector<double>& c, std::size_t j, std::size_t marks) {
  if (c.empty()) return 0.0;
  if (c.size() == 1) return c[0];
  if (c.size() != marks) throw std::invalid_argument("linear generator: coefficient count does not match marks");
  return c[j];
}

/// sqrt(sum_j lambda_j c_j^2)
double weighted_norm(const std::vector<double>& c, const LevyModel& m) {
  double s = 0.0;
  for (std::size_t j = 0; j < m.mark_count(); ++j) {
    const double cj = coefficient_for(c, j, m.mark_count());
    s += m.marks()[j].intensity * cj * cj;
  }
  return std::sqrt(s);
}

GeneratorSpec base_spec(std::string name) {
  GeneratorSpec g;
  g.name = std::move(name);
  g.coeffs = Coefficients{constant_coeff(0.0),
                          constant_coeff(0.0),
                          constant_coeff(0.0),
                          constant_coeff(0.0),
                          [](double) { return 0.0; },
                          RhoFunction::identity()};
  return g;
}

GeneratorSpec make_zero(const GeneratorParams&) {
  GeneratorSpec g = base_spec("zero");
  g.eval = [](const PathContext&, double, double, double, const JumpVector&) { return 0.0; };
  return g;
}

GeneratorSpec make_linear_y(const GeneratorParams& p) {
  GeneratorSpec g = base_spec("linear_y");
  const double k = p.k;
  g.eval = [k](const PathContext&, double, double y, double, const JumpVector&) { return k * y; };
  g.coeffs.K1 = constant_coeff(std::abs(k));
  g.coeffs.alpha = [k](double) { return std::max(k, 0.0); };
  return g;
}

GeneratorSpec make_linear(std::string name, double a, double b, std::vector<double> c) {
  GeneratorSpec g = base_spec(std::move(name));
  g.eval = [a, b, c](const PathContext& ctx, double, double y, double z, const JumpVector& u) {
    double jump = 0.0;
    const LevyModel& m = *ctx.model;
    for (std::size_t j = 0; j < u.size(); ++j)
      jump += coefficient_for(c, j, m.mark_count()) * m.marks()[j].intensity * u[j];
    return a * y + b * z + jump;
  };
  // |b z + sum c_j lambda_j u_j| <= |b||z| + ||c|| ||u||
  CoefficientFn lip = [b, c](const PathContext& ctx, double) {
    return std::max(std::abs(b), weighted_norm(c, *ctx.model));
  };
  g.coeffs.K1 = constant_coeff(std::abs(a));
  g.coeffs.K2 = lip;
  g.coeffs.beta = lip;
  g.coeffs.alpha = [a](double) { return std::max(a, 0.0); };
  g.flags.satisfies_A_gamma = std::all_of(c.begin(), c.end(), [](double cj) { return cj >= -1.0; });
  return g;
}

GeneratorSpec make_intro(const GeneratorParams&) {
  GeneratorSpec g = base_spec("intro_example");
  g.eval = [](const PathContext& ctx, double t, double, double, const JumpVector& u) {
    double v = 0.0;
    const LevyModel& m = *ctx.model;
    for (std::size_t j = 0; j < u.size(); ++j) v += u[j] * intro_kappa(t, m.marks()[j].size) * m.marks()[j].intensity;
    return std::tanh(v);
  };
  // sup |tanh'| = 1, so K2(s) = beta(s) = ||kappa(s, .)||
  CoefficientFn kappa_norm = [](const PathContext& ctx, double t) {
    double s = 0.0;
    for (const Mark& mk : ctx.model->marks()) {
      const double k = intro_kappa(t, mk.size);
      s += mk.intensity * k * k;
    }
    return std::sqrt(s);
  };
  g.coeffs.K2 = kappa_norm;
  g.coeffs.beta = kappa_norm;
  return g;
}

}  // namespace

double intro_kappa(double s, double x) {
  if (s <= 0.0) return 0.0;
  return std::pow(s, -0.25) * std::min(std::abs(x), 1.0);
}

const std::map<std::string, GeneratorFactory>& builtin_generators() {
  static const std::map<std::string, GeneratorFactory> catalog{
      {"zero", make_zero},
      {"linear_y", make_linear_y},
      {"linear", [](const GeneratorParams& p) { return make_linear("linear", p.a, p.b, p.c); }},
      {"intro_example", make_intro},
      {"a_gamma_violator",
       [](const GeneratorParams&) {
         GeneratorSpec g = make_linear("a_gamma_violator", 0.0, 0.0, {-2.0});
         g.flags.satisfies_A_gamma = false;
         return g;
       }},
      {"a_gamma_boundary",
       [](const GeneratorParams&) { return make_linear("a_gamma_boundary", 0.0, 0.0, {-1.0}); }},
  };
  return catalog;
}

GeneratorSpec make_generator(const std::string& name, const GeneratorParams& params) {
  const auto& catalog = builtin_generators();
  const auto it = catalog.find(name);
  if (it == catalog.end()) throw std::invalid_argument("unknown generator '" + name + "'");
  return shifted(it->second(params), params.offset);
}

}  // namespace jumpbsde
