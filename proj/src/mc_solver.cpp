#include "jumpbsde/mc_solver.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <stdexcept>

namespace jumpbsde {

std::size_t basis_dimension(std::size_t k, int degree) {
  // C(k + d, d)
  std::size_t r = 1;
  for (int i = 1; i <= degree; ++i) r = r * (k + i) / i;
  return r;
}

namespace {

std::size_t feature_count(const RegressionBasis& basis, std::size_t marks) {
  std::size_t k = 0;
  for (const auto& f : basis.features) {
    if (f == "X" || f == "W")
      ++k;
    else if (f == "N")
      k += marks;
    else
      throw std::invalid_argument("unknown regression feature '" + f + "' (use X, W, N)");
  }
  return k;
}

/// Exponent vectors of all monomials of total degree <= d in k variables, graded order.
std::vector<std::vector<int>> monomials(std::size_t k, int d) {
  std::vector<std::vector<int>> out;
  std::vector<int> e(k, 0);
  for (int total = 0; total <= d; ++total) {
    // enumerate compositions of `total` into k parts
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
      if (pos + 1 == k || k == 0) {
        if (k > 0) e[pos] = left;
        if (k > 0 || left == 0) out.push_back(e);
        return;
      }
      for (int v = left; v >= 0; --v) {
        e[pos] = v;
        rec(pos + 1, left - v);
      }
    };
    rec(0, total);
  }
  return out;
}

struct RegressionResult {
  Eigen::MatrixXd fitted;
  int degree = 0;
};

/// Least squares of every column of rhs on the polynomial basis in `features` (paths x k),
/// lowering the degree until the design matrix has full column rank.
RegressionResult regress(const Eigen::MatrixXd& features, const Eigen::MatrixXd& rhs, int degree) {
  const Eigen::Index P = features.rows();
  // standardize; constant features carry no information
  std::vector<Eigen::VectorXd> cols;
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    const double mean = features.col(c).mean();
    const double sd = std::sqrt((features.col(c).array() - mean).square().mean());
    if (sd <= 1e-12 * (1.0 + std::abs(mean))) continue;
    cols.push_back((features.col(c).array() - mean) / sd);
  }
  const std::size_t k = cols.size();
  for (int d = (k == 0 ? 0 : degree); d >= 0; --d) {
    const auto mons = monomials(k, d);
    Eigen::MatrixXd phi(P, static_cast<Eigen::Index>(mons.size()));
    for (std::size_t m = 0; m < mons.size(); ++m) {
      Eigen::ArrayXd col = Eigen::ArrayXd::Ones(P);
      for (std::size_t v = 0; v < k; ++v)
        for (int p = 0; p < mons[m][v]; ++p) col *= cols[v].array();
      phi.col(static_cast<Eigen::Index>(m)) = col.matrix();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
    qr.setThreshold(1e-10);
    if (qr.rank() < phi.cols()) continue;
    const Eigen::MatrixXd coef = qr.solve(rhs);
    return {phi * coef, d};
  }
  throw std::runtime_error("regression design matrix is rank deficient even at degree 0");
}

McSolution solve_once(const PathBundle& bundle, const GeneratorSpec& g, const TerminalFunctional& xi,
                      const McOptions& opts) {
  const std::size_t P = bundle.paths();
  const int N = bundle.steps();
  const std::size_t J = bundle.marks();
  const LevyModel& model = bundle.model();
  const double dt = bundle.grid().dt();
  const bool brownian = model.sigma() > 0.0;

  const std::size_t k = feature_count(opts.basis, J);
  if (opts.basis.degree < 0) throw std::invalid_argument("basis degree must be >= 0");
  const std::size_t dim = basis_dimension(k, opts.basis.degree);
  if (P < 10 * dim)
    throw std::invalid_argument("need at least " + std::to_string(10 * dim) + " paths for a basis of dimension " +
                                std::to_string(dim));

  McSolution sol;
  sol.paths = P;
  sol.steps = N;
  sol.marks = J;
  sol.summary.resize(N + 1);
  if (opts.keep_paths) {
    sol.Y.assign(P * (N + 1), 0.0);
    sol.Z.assign(P * N, 0.0);
    sol.U.assign(P * N * J, 0.0);
  }

  // state at T, then walked backwards by subtracting increments
  std::vector<double> x(P, 0.0), w(P, 0.0);
  std::vector<int> counts(P * J, 0);
  for (std::size_t p = 0; p < P; ++p)
    for (int i = 0; i < N; ++i) {
      x[p] += bundle.dX(p, i);
      w[p] += bundle.dW(p, i);
      for (std::size_t j = 0; j < J; ++j) counts[p * J + j] += bundle.dN(p, i, j);
    }
  auto ctx = [&](std::size_t p) {
    return PathContext{&model, x[p], w[p], std::span<const int>(counts).subspan(p * J, J)};
  };

  auto summarize = [&](int level, const std::vector<double>& y) {
    double m = 0.0;
    for (double v : y) m += v;
    m /= static_cast<double>(P);
    double s2 = 0.0;
    for (double v : y) s2 += (v - m) * (v - m);
    auto& s = sol.summary[level];
    s.y_mean = m;
    s.y_se = P > 1 ? std::sqrt(s2 / static_cast<double>(P - 1) / static_cast<double>(P)) : 0.0;
    s.u_mean.assign(J, 0.0);
  };

  std::vector<double> y(P);
  for (std::size_t p = 0; p < P; ++p) y[p] = xi(ctx(p));
  summarize(N, y);
  if (opts.keep_paths)
    for (std::size_t p = 0; p < P; ++p) sol.Y[p * (N + 1) + N] = y[p];

  std::vector<double> var(J);
  for (std::size_t j = 0; j < J; ++j) var[j] = bundle.compensated_variance(j);

  Eigen::MatrixXd feats(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(k));
  Eigen::MatrixXd rhs(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(2 + J));
  JumpVector u(J);
  for (int i = N - 1; i >= 0; --i) {
    for (std::size_t p = 0; p < P; ++p) {
      const auto r = static_cast<Eigen::Index>(p);
      rhs(r, 0) = y[p];
      rhs(r, 1) = y[p] * bundle.dW(p, i);
      for (std::size_t j = 0; j < J; ++j) rhs(r, 2 + static_cast<Eigen::Index>(j)) = y[p] * bundle.compensated(p, i, j);
      // step back to t_i
      if (i == 0) {
        x[p] = 0.0;
        w[p] = 0.0;
        for (std::size_t j = 0; j < J; ++j) counts[p * J + j] = 0;
      } else {
        x[p] -= bundle.dX(p, i);
        w[p] -= bundle.dW(p, i);
        for (std::size_t j = 0; j < J; ++j) counts[p * J + j] -= bundle.dN(p, i, j);
      }
      Eigen::Index c = 0;
      for (const auto& f : opts.basis.features) {
        if (f == "X")
          feats(r, c++) = x[p];
        else if (f == "W")
          feats(r, c++) = w[p];
        else
          for (std::size_t j = 0; j < J; ++j) feats(r, c++) = counts[p * J + j];
      }
    }
    const RegressionResult reg = regress(feats, rhs, opts.basis.degree);
    auto& s = sol.summary[i];
    s.degree = reg.degree;
    if (reg.degree < opts.basis.degree && k > 0 && i > 0) sol.degree_reduced = true;

    const double t = bundle.grid().time(i);
    double zsum = 0.0;
    std::vector<double> usum(J, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
      const auto r = static_cast<Eigen::Index>(p);
      const double e = reg.fitted(r, 0);
      const double z = brownian ? reg.fitted(r, 1) / dt : 0.0;
      for (std::size_t j = 0; j < J; ++j) u[j] = reg.fitted(r, 2 + static_cast<Eigen::Index>(j)) / var[j];
      const PathContext c = ctx(p);
      if (opts.scheme == McScheme::Implicit)
        y[p] = implicit_step(e, dt, [&](double yy) { return g(c, t, yy, z, u); }, opts.fixed_point);
      else
        y[p] = e + dt * g(c, t, e, z, u);
      zsum += z;
      for (std::size_t j = 0; j < J; ++j) usum[j] += u[j];
      if (opts.keep_paths) {
        sol.Y[p * (N + 1) + i] = y[p];
        sol.Z[p * N + i] = z;
        for (std::size_t j = 0; j < J; ++j) sol.U[(p * N + i) * J + j] = u[j];
      }
    }
    summarize(i, y);
    s.z_mean = zsum / static_cast<double>(P);
    for (std::size_t j = 0; j < J; ++j) s.u_mean[j] = usum[j] / static_cast<double>(P);
  }
  sol.y0 = sol.summary[0].y_mean;
  return sol;
}

}  // namespace

McSolution solve_mc(const PathBundle& bundle, const GeneratorSpec& g, const TerminalFunctional& xi,
                    const McOptions& opts) {
  McSolution sol = solve_once(bundle, g, xi, opts);
  if (opts.bootstrap == 0) return sol;

  McOptions inner = opts;
  inner.keep_paths = false;
  std::mt19937_64 rng(path_stream_seed(opts.seed, 0xb0075742ULL));
  std::uniform_int_distribution<std::size_t> pick(0, bundle.paths() - 1);
  std::vector<std::size_t> idx(bundle.paths());
  std::vector<double> draws;
  draws.reserve(opts.bootstrap);
  for (std::size_t b = 0; b < opts.bootstrap; ++b) {
    for (auto& v : idx) v = pick(rng);
    draws.push_back(solve_once(bundle.select(idx), g, xi, inner).y0);
  }
  double m = 0.0;
  for (double v : draws) m += v;
  m /= static_cast<double>(draws.size());
  double s2 = 0.0;
  for (double v : draws) s2 += (v - m) * (v - m);
  sol.y0_bootstrap_se = draws.size() > 1 ? std::sqrt(s2 / static_cast<double>(draws.size() - 1)) : 0.0;
  return sol;
}

McSolution solve_mc(const LevyModel& model, const TimeGrid& grid, const GeneratorSpec& g,
                    const TerminalFunctional& xi, const McOptions& opts) {
  const PathBundle bundle = simulate_paths(model, grid, opts.paths, opts.seed, opts.law);
  return solve_mc(bundle, g, xi, opts);
}

void McSolution::write_csv(std::ostream& out) const {
  out << "step,Y_mean,Y_se,Z_mean";
  for (std::size_t j = 0; j < marks; ++j) out << ",U_" << (j + 1) << "_mean";
  out << ",degree\n";
  out.precision(17);
  for (std::size_t i = 0; i < summary.size(); ++i) {
    const auto& s = summary[i];
    const bool terminal = static_cast<int>(i) == steps;
    out << i << ',' << s.y_mean << ',' << s.y_se << ',';
    if (!terminal) out << s.z_mean;
    for (std::size_t j = 0; j < marks; ++j) {
      out << ',';
      if (!terminal && j < s.u_mean.size()) out << s.u_mean[j];
    }
    out << ',';
    if (!terminal) out << s.degree;
    out << '\n';
  }
}

L2Distance l2_distance(const ScenarioTree& tree, const SolutionGrid& a, const SolutionGrid& b) {
  const int N = tree.steps();
  const std::size_t J = tree.marks();
  auto shape_ok = [&](const SolutionGrid& s) {
    if (s.marks != J || s.Y.size() != static_cast<std::size_t>(N + 1) || s.Z.size() != static_cast<std::size_t>(N) ||
        s.U.size() != static_cast<std::size_t>(N))
      return false;
    for (int i = 0; i < N; ++i)
      if (s.Y[i].size() != tree.level_size(i) || s.Z[i].size() != tree.level_size(i) ||
          s.U[i].size() != tree.level_size(i) * J)
        return false;
    return true;
  };
  if (!shape_ok(a) || !shape_ok(b)) throw std::invalid_argument("solutions are not indexed by this tree");
  const double dt = tree.grid().dt();
  L2Distance d;
  for (int i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < tree.level_size(i); ++k) {
      const double p = tree.probability(i, k) * dt;
      const double dy = a.Y[i][k] - b.Y[i][k];
      const double dz = a.Z[i][k] - b.Z[i][k];
      d.dY += p * dy * dy;
      d.dZ += p * dz * dz;
      for (std::size_t j = 0; j < J; ++j) {
        const double du = a.U[i][k * J + j] - b.U[i][k * J + j];
        d.dU += p * tree.model().marks()[j].intensity * du * du;
      }
    }
  }
  return d;
}

L2Distance l2_distance(const McSolution& a, const McSolution& b, const LevyModel& model, const TimeGrid& grid) {
  const std::size_t P = a.paths;
  const int N = grid.steps();
  const std::size_t J = model.mark_count();
  if (b.paths != P || a.steps != N || b.steps != N || a.marks != J || b.marks != J)
    throw std::invalid_argument("solutions are not indexed by the same paths and grid");
  if (a.Y.size() != P * (N + 1) || b.Y.size() != P * (N + 1))
    throw std::invalid_argument("l2_distance needs solutions computed with keep_paths");
  const double w = grid.dt() / static_cast<double>(P);
  L2Distance d;
  for (std::size_t p = 0; p < P; ++p) {
    for (int i = 0; i < N; ++i) {
      const double dy = a.Y[p * (N + 1) + i] - b.Y[p * (N + 1) + i];
      const double dz = a.Z[p * N + i] - b.Z[p * N + i];
      d.dY += w * dy * dy;
      d.dZ += w * dz * dz;
      for (std::size_t j = 0; j < J; ++j) {
        const double du = a.U[(p * N + i) * J + j] - b.U[(p * N + i) * J + j];
        d.dU += w * model.marks()[j].intensity * du * du;
      }
    }
  }
  return d;
}

}  // namespace jumpbsde
