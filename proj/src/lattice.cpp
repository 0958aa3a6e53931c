#include "jumpbsde/lattice.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace jumpbsde {

ScenarioTree::ScenarioTree(LevyModel model, TimeGrid grid) : model_(std::move(model)), grid_(grid) {}

ScenarioTree ScenarioTree::build(const LevyModel& model, const TimeGrid& grid, std::size_t node_cap) {
  if (!grid.admits_lattice(model))
    throw std::invalid_argument("scenario tree needs lambda_j * dt < 1 for every mark");
  const std::size_t J = model.mark_count();
  if (J > 20) throw NodeCapExceeded("too many marks for a product tree");
  const bool brownian = model.sigma() > 0.0;
  const std::size_t B = (std::size_t{1} << J) * (brownian ? 2 : 1);

  std::size_t total = 0, width = 1;
  for (int i = 0; i <= grid.steps(); ++i) {
    total += width;
    if (total > node_cap)
      throw NodeCapExceeded("scenario tree would need more than " + std::to_string(node_cap) + " nodes");
    if (i < grid.steps() && width > node_cap / B + 1)
      throw NodeCapExceeded("scenario tree would need more than " + std::to_string(node_cap) + " nodes");
    width *= B;
  }

  ScenarioTree tree(model, grid);
  tree.branching_ = B;
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  tree.branch_prob_.resize(B);
  tree.branch_dw_.resize(B, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    double p = brownian ? 0.5 : 1.0;
    for (std::size_t j = 0; j < J; ++j) {
      const double q = model.marks()[j].intensity * dt;
      p *= ((b >> j) & 1U) ? q : 1.0 - q;
    }
    tree.branch_prob_[b] = p;
    if (brownian) tree.branch_dw_[b] = ((b >> J) & 1U) ? -sqdt : sqdt;
  }

  // state increments per branch
  std::vector<double> dx(B);
  for (std::size_t b = 0; b < B; ++b) {
    double v = model.drift() * dt + model.sigma() * tree.branch_dw_[b];
    for (std::size_t j = 0; j < J; ++j) {
      const double jump = ((b >> j) & 1U) ? 1.0 : 0.0;
      const double count = model.is_compensated(j) ? jump - model.marks()[j].intensity * dt : jump;
      v += model.marks()[j].size * count;
    }
    dx[b] = v;
  }

  const int N = grid.steps();
  tree.x_.resize(N + 1);
  tree.w_.resize(N + 1);
  tree.prob_.resize(N + 1);
  tree.counts_.resize(N + 1);
  tree.x_[0] = {0.0};
  tree.w_[0] = {0.0};
  tree.prob_[0] = {1.0};
  tree.counts_[0].assign(J, 0);
  for (int i = 0; i < N; ++i) {
    const std::size_t n = tree.x_[i].size();
    auto& x = tree.x_[i + 1];
    auto& w = tree.w_[i + 1];
    auto& p = tree.prob_[i + 1];
    auto& c = tree.counts_[i + 1];
    x.resize(n * B);
    w.resize(n * B);
    p.resize(n * B);
    c.resize(n * B * J);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t b = 0; b < B; ++b) {
        const std::size_t child = k * B + b;
        x[child] = tree.x_[i][k] + dx[b];
        w[child] = tree.w_[i][k] + tree.branch_dw_[b];
        p[child] = tree.prob_[i][k] * tree.branch_prob_[b];
        for (std::size_t j = 0; j < J; ++j)
          c[child * J + j] = tree.counts_[i][k * J + j] + static_cast<int>((b >> j) & 1U);
      }
    }
  }
  return tree;
}

std::size_t ScenarioTree::total_nodes() const {
  std::size_t s = 0;
  for (const auto& level : x_) s += level.size();
  return s;
}

double ScenarioTree::branch_compensated(std::size_t b, std::size_t mark) const {
  return (branch_fires(b, mark) ? 1.0 : 0.0) - model_.marks()[mark].intensity * grid_.dt();
}

double ScenarioTree::compensated_variance(std::size_t mark) const {
  const double q = model_.marks()[mark].intensity * grid_.dt();
  return q * (1.0 - q);
}

std::span<const int> ScenarioTree::counts(int level, std::size_t node) const {
  const std::size_t J = marks();
  return std::span<const int>(counts_[level]).subspan(node * J, J);
}

PathContext ScenarioTree::context(int level, std::size_t node) const {
  return PathContext{&model_, x_[level][node], w_[level][node], counts(level, node)};
}

std::vector<double> ScenarioTree::conditional_expectation(int level, std::span<const double> next) const {
  const std::size_t n = level_size(level);
  if (next.size() != n * branching_) throw std::invalid_argument("values do not match the next level");
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t b = 0; b < branching_; ++b) s += branch_prob_[b] * next[k * branching_ + b];
    out[k] = s;
  }
  return out;
}

std::vector<double> ScenarioTree::terminal_values(const TerminalFunctional& xi) const {
  const int N = steps();
  std::vector<double> out(level_size(N));
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = xi(context(N, k));
  return out;
}

JumpVector SolutionGrid::u_vector(int level, std::size_t node) const {
  JumpVector v(marks);
  for (std::size_t j = 0; j < marks; ++j) v[j] = U[level][node * marks + j];
  return v;
}

void SolutionGrid::write_csv(std::ostream& out) const {
  out << "level,node,Y,Z";
  for (std::size_t j = 0; j < marks; ++j) out << ",U_" << (j + 1);
  out << '\n';
  out.precision(17);
  for (std::size_t level = 0; level < Y.size(); ++level) {
    const bool terminal = level >= Z.size();
    for (std::size_t k = 0; k < Y[level].size(); ++k) {
      out << level << ',' << k << ',' << Y[level][k] << ',';
      if (!terminal) out << Z[level][k];
      for (std::size_t j = 0; j < marks; ++j) {
        out << ',';
        if (!terminal) out << U[level][k * marks + j];
      }
      out << '\n';
    }
  }
}

double implicit_step(double expectation, double dt, const std::function<double(double)>& f,
                     const FixedPointOptions& opts, int* iterations) {
  double y = expectation;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const double next = expectation + dt * f(y);
    const double tol = std::max(opts.tol, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(next));
    if (!std::isfinite(next)) break;
    if (std::abs(next - y) <= tol) {
      if (iterations) *iterations = it;
      return next;
    }
    y = next;
  }
  throw FixedPointError("implicit step did not converge in " + std::to_string(opts.max_iterations) +
                        " iterations; reduce dt relative to the generator's y-sensitivity");
}

namespace {

/// Generator evaluated at a node: (level, node, t, y, z, u) -> f.
using NodeGenerator = std::function<double(int, std::size_t, double, double, double, const JumpVector&)>;

SolutionGrid backward_sweep(const ScenarioTree& tree, std::vector<double> terminal, const NodeGenerator& f,
                            const FixedPointOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("fixed-point tolerance must be > 0");
  const int N = tree.steps();
  const std::size_t B = tree.branching();
  const std::size_t J = tree.marks();
  const double dt = tree.grid().dt();

  SolutionGrid sol;
  sol.marks = J;
  sol.Y.resize(N + 1);
  sol.Z.resize(N);
  sol.U.resize(N);
  sol.Y[N] = std::move(terminal);

  std::vector<double> comp(B * J), var(J);
  for (std::size_t j = 0; j < J; ++j) var[j] = tree.compensated_variance(j);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < J; ++j) comp[b * J + j] = tree.branch_compensated(b, j);

  JumpVector u(J);
  for (int i = N - 1; i >= 0; --i) {
    const double t = tree.grid().time(i);
    const std::size_t n = tree.level_size(i);
    const auto& next = sol.Y[i + 1];
    auto& Y = sol.Y[i];
    auto& Z = sol.Z[i];
    auto& U = sol.U[i];
    Y.resize(n);
    Z.resize(n);
    U.resize(n * J);
    for (std::size_t k = 0; k < n; ++k) {
      double e = 0.0, ez = 0.0;
      for (std::size_t j = 0; j < J; ++j) u[j] = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double py = tree.branch_probability(b) * next[k * B + b];
        e += py;
        ez += py * tree.branch_dW(b);
        for (std::size_t j = 0; j < J; ++j) u[j] += py * comp[b * J + j];
      }
      const double z = tree.has_brownian() ? ez / dt : 0.0;
      for (std::size_t j = 0; j < J; ++j) u[j] /= var[j];
      int used = 0;
      Y[k] = implicit_step(e, dt, [&](double y) { return f(i, k, t, y, z, u); }, opts, &used);
      sol.max_iterations_used = std::max(sol.max_iterations_used, used);
      Z[k] = z;
      for (std::size_t j = 0; j < J; ++j) U[k * J + j] = u[j];
    }
  }
  return sol;
}

}  // namespace

SolutionGrid solve_backward(const ScenarioTree& tree, const GeneratorSpec& g, const TerminalFunctional& xi,
                            const FixedPointOptions& opts) {
  NodeGenerator f = [&](int level, std::size_t node, double t, double y, double z, const JumpVector& u) {
    return g(tree.context(level, node), t, y, z, u);
  };
  return backward_sweep(tree, tree.terminal_values(xi), f, opts);
}

namespace {

/// Bit mask of the marks removed by truncation level n.
std::size_t small_mask(const LevyModel& model, int n) {
  if (n < 1) throw std::invalid_argument("truncation level must be >= 1");
  std::size_t mask = 0;
  for (std::size_t j = 0; j < model.mark_count(); ++j)
    if (std::abs(model.marks()[j].size) < 1.0 / n) mask |= std::size_t{1} << j;
  return mask;
}

/// Probability of the small-mark bits of branch b.
double small_probability(const ScenarioTree& tree, std::size_t b, std::size_t mask) {
  double p = 1.0;
  const double dt = tree.grid().dt();
  for (std::size_t j = 0; j < tree.marks(); ++j) {
    if (!((mask >> j) & 1U)) continue;
    const double q = tree.model().marks()[j].intensity * dt;
    p *= tree.branch_fires(b, j) ? q : 1.0 - q;
  }
  return p;
}

}  // namespace

std::vector<double> project_En(const ScenarioTree& tree, int level, std::span<const double> values, int n) {
  if (values.size() != tree.level_size(level)) throw std::invalid_argument("values do not match the level size");
  const std::size_t mask = small_mask(tree.model(), n);
  std::vector<double> cur(values.begin(), values.end());
  if (mask == 0) return cur;
  const std::size_t B = tree.branching();

  std::vector<std::size_t> subsets;
  for (std::size_t s = mask;; s = (s - 1) & mask) {
    subsets.push_back(s);
    if (s == 0) break;
  }
  std::vector<double> sub_prob(subsets.size());
  for (std::size_t q = 0; q < subsets.size(); ++q) sub_prob[q] = small_probability(tree, subsets[q], mask);

  std::vector<double> out(cur.size());
  std::size_t stride = 1;
  for (int step = level - 1; step >= 0; --step, stride *= B) {
    for (std::size_t k = 0; k < cur.size(); ++k) {
      const std::size_t digit = (k / stride) % B;
      if (digit & mask) continue;
      double acc = 0.0;
      for (std::size_t q = 0; q < subsets.size(); ++q) acc += sub_prob[q] * cur[k + subsets[q] * stride];
      for (std::size_t s : subsets) out[k + s * stride] = acc;
    }
    cur.swap(out);
  }
  return cur;
}

std::vector<std::vector<double>> project_En(const ScenarioTree& tree, const std::vector<std::vector<double>>& values,
                                            int n) {
  std::vector<std::vector<double>> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = project_En(tree, static_cast<int>(i), values[i], n);
  return out;
}

SolutionGrid solve_truncated(const ScenarioTree& tree, const GeneratorSpec& g, const TerminalFunctional& xi, int n,
                             const FixedPointOptions& opts) {
  const std::size_t mask = small_mask(tree.model(), n);
  if (mask == 0) return solve_backward(tree, g, xi, opts);

  const LevyModel& model = tree.model();
  const std::size_t J = model.mark_count();
  const ScenarioTree reduced = ScenarioTree::build(truncate_model(model, n), tree.grid());
  const std::size_t B = tree.branching();
  const std::size_t Br = reduced.branching();

  // retained marks in order, and the digit map full branch -> reduced branch
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < J; ++j)
    if (!((mask >> j) & 1U)) kept.push_back(j);
  std::vector<std::size_t> digit(B);
  std::vector<double> weight(B);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t r = 0;
    for (std::size_t q = 0; q < kept.size(); ++q)
      if (tree.branch_fires(b, kept[q])) r |= std::size_t{1} << q;
    if (tree.has_brownian() && ((b >> J) & 1U)) r |= std::size_t{1} << kept.size();
    digit[b] = r;
    weight[b] = small_probability(tree, b, mask);
  }

  // For each level: full node -> reduced node and conditional weight, grouped by reduced node.
  const int N = tree.steps();
  std::vector<std::vector<std::size_t>> to_reduced(N + 1);
  std::vector<std::vector<double>> node_weight(N + 1);
  to_reduced[0] = {0};
  node_weight[0] = {1.0};
  for (int i = 0; i < N; ++i) {
    const std::size_t size = tree.level_size(i);
    to_reduced[i + 1].resize(size * B);
    node_weight[i + 1].resize(size * B);
    for (std::size_t k = 0; k < size; ++k)
      for (std::size_t b = 0; b < B; ++b) {
        to_reduced[i + 1][k * B + b] = to_reduced[i][k] * Br + digit[b];
        node_weight[i + 1][k * B + b] = node_weight[i][k] * weight[b];
      }
  }
  std::vector<std::vector<std::size_t>> group_start(N + 1), group_nodes(N + 1);
  for (int i = 0; i <= N; ++i) {
    const std::size_t nr = reduced.level_size(i);
    auto& start = group_start[i];
    auto& nodes = group_nodes[i];
    start.assign(nr + 1, 0);
    for (std::size_t r : to_reduced[i]) ++start[r + 1];
    for (std::size_t r = 0; r < nr; ++r) start[r + 1] += start[r];
    nodes.resize(to_reduced[i].size());
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t k = 0; k < to_reduced[i].size(); ++k) nodes[fill[to_reduced[i][k]]++] = k;
  }

  // E_n xi on the reduced leaves
  const std::vector<double> xi_full = tree.terminal_values(xi);
  std::vector<double> xi_reduced(reduced.level_size(N), 0.0);
  for (std::size_t r = 0; r < xi_reduced.size(); ++r) {
    double acc = 0.0;
    for (std::size_t q = group_start[N][r]; q < group_start[N][r + 1]; ++q) {
      const std::size_t k = group_nodes[N][q];
      acc += node_weight[N][k] * xi_full[k];
    }
    xi_reduced[r] = acc;
  }

  // f_n = E_n f, evaluated with U extended by zero on the removed marks
  NodeGenerator fn = [&](int level, std::size_t r, double t, double y, double z, const JumpVector& ur) {
    JumpVector u(J);
    for (std::size_t q = 0; q < kept.size(); ++q) u[kept[q]] = ur[q];
    double acc = 0.0;
    for (std::size_t q = group_start[level][r]; q < group_start[level][r + 1]; ++q) {
      const std::size_t k = group_nodes[level][q];
      acc += node_weight[level][k] * g(tree.context(level, k), t, y, z, u);
    }
    return acc;
  };
  const SolutionGrid red = backward_sweep(reduced, std::move(xi_reduced), fn, opts);

  SolutionGrid sol;
  sol.marks = J;
  sol.max_iterations_used = red.max_iterations_used;
  sol.Y.resize(N + 1);
  sol.Z.resize(N);
  sol.U.resize(N);
  for (int i = 0; i <= N; ++i) {
    const std::size_t size = tree.level_size(i);
    sol.Y[i].resize(size);
    for (std::size_t k = 0; k < size; ++k) sol.Y[i][k] = red.Y[i][to_reduced[i][k]];
    if (i == N) break;
    sol.Z[i].resize(size);
    sol.U[i].assign(size * J, 0.0);
    for (std::size_t k = 0; k < size; ++k) {
      const std::size_t r = to_reduced[i][k];
      sol.Z[i][k] = red.Z[i][r];
      for (std::size_t q = 0; q < kept.size(); ++q) sol.U[i][k * J + kept[q]] = red.U[i][r * kept.size() + q];
    }
  }
  return sol;
}

SolutionNorms solution_norms(const ScenarioTree& tree, const SolutionGrid& sol) {
  SolutionNorms out;
  const int N = tree.steps();
  const double dt = tree.grid().dt();
  const std::size_t B = tree.branching();
  const std::size_t J = tree.marks();
  std::vector<double> running{sol.Y[0][0] * sol.Y[0][0]};
  for (int i = 0; i <= N; ++i) {
    const std::size_t n = tree.level_size(i);
    if (i > 0) {
      std::vector<double> next(n);
      for (std::size_t k = 0; k < n; ++k) next[k] = std::max(running[k / B], sol.Y[i][k] * sol.Y[i][k]);
      running.swap(next);
    }
    if (i == N) {
      for (std::size_t k = 0; k < n; ++k) out.sup_y2 += tree.probability(i, k) * running[k];
      break;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double p = tree.probability(i, k) * dt;
      out.y2_l2 += p * sol.Y[i][k] * sol.Y[i][k];
      out.z2 += p * sol.Z[i][k] * sol.Z[i][k];
      double nu = 0.0;
      for (std::size_t j = 0; j < J; ++j) {
        const double v = sol.U[i][k * J + j];
        nu += tree.model().marks()[j].intensity * v * v;
      }
      out.u2 += p * nu;
    }
  }
  return out;
}

double representation_residual(const ScenarioTree& tree, const SolutionGrid& sol) {
  double worst = 0.0;
  const std::size_t B = tree.branching();
  const std::size_t J = tree.marks();
  for (int i = 0; i < tree.steps(); ++i) {
    for (std::size_t k = 0; k < tree.level_size(i); ++k) {
      for (std::size_t b = 0; b < B; ++b) {
        double r = sol.Y[i + 1][k * B + b] - sol.Y[i][k] - sol.Z[i][k] * tree.branch_dW(b);
        for (std::size_t j = 0; j < J; ++j) r -= sol.U[i][k * J + j] * tree.branch_compensated(b, j);
        worst = std::max(worst, std::abs(r));
      }
    }
  }
  return worst;
}

double scheme_residual(const ScenarioTree& tree, const GeneratorSpec& g, const SolutionGrid& sol) {
  double worst = 0.0;
  const double dt = tree.grid().dt();
  for (int i = 0; i < tree.steps(); ++i) {
    const std::vector<double> e = tree.conditional_expectation(i, sol.Y[i + 1]);
    const double t = tree.grid().time(i);
    for (std::size_t k = 0; k < e.size(); ++k) {
      const double f = g(tree.context(i, k), t, sol.Y[i][k], sol.Z[i][k], sol.u_vector(i, k));
      worst = std::max(worst, std::abs(sol.Y[i][k] - e[k] - dt * f));
    }
  }
  return worst;
}

double martingale_defect(const ScenarioTree& tree, const SolutionGrid& sol) {
  double worst = 0.0;
  for (int i = 0; i < tree.steps(); ++i) {
    const std::vector<double> e = tree.conditional_expectation(i, sol.Y[i + 1]);
    for (std::size_t k = 0; k < e.size(); ++k) worst = std::max(worst, std::abs(e[k] - sol.Y[i][k]));
  }
  return worst;
}

}  // namespace jumpbsde
