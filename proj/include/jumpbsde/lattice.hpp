#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "jumpbsde/generators.hpp"
#include "jumpbsde/levy_model.hpp"
#include "jumpbsde/terminals.hpp"

namespace jumpbsde {

inline constexpr std::size_t kDefaultNodeCap = 2'000'000;

class NodeCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FixedPointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact finite discretization of the filtration.
///
/// Every step branches over the product alphabet {Brownian sign} x prod_j {jump, no jump}.
/// Branch b encodes mark j in bit j (1 = the mark fires) and, when sigma > 0, the Brownian
/// sign in bit J (0 = up, 1 = down). Node `k` at level i+1 is child `k % B` of node `k / B`
/// at level i, so a node index is the base-B word of its branch letters, earliest step first.
class ScenarioTree {
 public:
  /// Throws std::invalid_argument when lambda_j dt >= 1 and NodeCapExceeded when the total
  /// node count exceeds node_cap.
  static ScenarioTree build(const LevyModel& model, const TimeGrid& grid, std::size_t node_cap = kDefaultNodeCap);

  const LevyModel& model() const { return model_; }
  const TimeGrid& grid() const { return grid_; }
  int steps() const { return grid_.steps(); }
  std::size_t branching() const { return branching_; }
  std::size_t marks() const { return model_.mark_count(); }
  bool has_brownian() const { return model_.sigma() > 0.0; }
  std::size_t level_size(int level) const { return x_[level].size(); }
  std::size_t total_nodes() const;

  double branch_probability(std::size_t b) const { return branch_prob_[b]; }
  double branch_dW(std::size_t b) const { return branch_dw_[b]; }
  bool branch_fires(std::size_t b, std::size_t mark) const { return (b >> mark) & 1U; }
  double branch_compensated(std::size_t b, std::size_t mark) const;
  /// lambda_j dt (1 - lambda_j dt), the exact variance of a compensated increment.
  double compensated_variance(std::size_t mark) const;

  double x(int level, std::size_t node) const { return x_[level][node]; }
  double w(int level, std::size_t node) const { return w_[level][node]; }
  std::span<const int> counts(int level, std::size_t node) const;
  double probability(int level, std::size_t node) const { return prob_[level][node]; }
  PathContext context(int level, std::size_t node) const;

  /// Probability-weighted average over the children of every level-`level` node.
  std::vector<double> conditional_expectation(int level, std::span<const double> next) const;

  /// xi evaluated at every leaf.
  std::vector<double> terminal_values(const TerminalFunctional& xi) const;

 private:
  ScenarioTree(LevyModel model, TimeGrid grid);

  LevyModel model_;
  TimeGrid grid_;
  std::size_t branching_ = 1;
  std::vector<double> branch_prob_;
  std::vector<double> branch_dw_;
  std::vector<std::vector<double>> x_;
  std::vector<std::vector<double>> w_;
  std::vector<std::vector<double>> prob_;
  std::vector<std::vector<int>> counts_;
};

/// (Y, Z, U) on the nodes of a scenario tree. Y has levels 0..N, Z and U levels 0..N-1;
/// U[level] stores marks() values per node.
struct SolutionGrid {
  std::size_t marks = 0;
  std::vector<std::vector<double>> Y;
  std::vector<std::vector<double>> Z;
  std::vector<std::vector<double>> U;
  int max_iterations_used = 0;

  double u(int level, std::size_t node, std::size_t mark) const { return U[level][node * marks + mark]; }
  JumpVector u_vector(int level, std::size_t node) const;

  void write_csv(std::ostream& out) const;
};

struct FixedPointOptions {
  double tol = 1e-12;
  int max_iterations = 200;
};

/// Solves y = expectation + dt * f(y) by fixed-point iteration. Returns the root and writes the
/// number of iterations used. Throws FixedPointError after max_iterations.
double implicit_step(double expectation, double dt, const std::function<double(double)>& f,
                     const FixedPointOptions& opts, int* iterations = nullptr);

/// Exact backward solver: implicit-in-y one-step scheme with the discrete martingale
/// representation coefficients Z = E[Y dW]/dt and U_j = E[Y dN~_j] / (lambda_j dt (1 - lambda_j dt)).
SolutionGrid solve_backward(const ScenarioTree& tree, const GeneratorSpec& g, const TerminalFunctional& xi,
                            const FixedPointOptions& opts = {});

/// Conditional expectation given the Brownian signs and the marks with |x_j| >= 1/n,
/// i.e. exact averaging over the branch bits of the smaller marks at every step.
std::vector<double> project_En(const ScenarioTree& tree, int level, std::span<const double> values, int n);

/// project_En applied level by level.
std::vector<std::vector<double>> project_En(const ScenarioTree& tree, const std::vector<std::vector<double>>& values,
                                            int n);

/// Solution of the BSDE driven by the truncated process with terminal value E_n xi and
/// generator E_n f; U vanishes on the removed marks. Returned on the nodes of `tree`.
SolutionGrid solve_truncated(const ScenarioTree& tree, const GeneratorSpec& g, const TerminalFunctional& xi, int n,
                             const FixedPointOptions& opts = {});

/// Tree norms of a solution.
struct SolutionNorms {
  double sup_y2 = 0.0;   // E sup_i |Y_i|^2
  double z2 = 0.0;       // E sum_i dt |Z_i|^2
  double u2 = 0.0;       // E sum_i dt ||U_i||^2
  double y2_l2 = 0.0;    // E sum_i dt |Y_i|^2
};

SolutionNorms solution_norms(const ScenarioTree& tree, const SolutionGrid& sol);

/// Largest |Y_{i+1} - Y_i - Z_i dW - sum_j U_ij dN~_j| over all edges.
double representation_residual(const ScenarioTree& tree, const SolutionGrid& sol);

/// Largest |Y_i - E_i[Y_{i+1}] - dt f(t_i, Y_i, Z_i, U_i)| over all nodes.
double scheme_residual(const ScenarioTree& tree, const GeneratorSpec& g, const SolutionGrid& sol);

/// Largest |E_i[Y_{i+1}] - Y_i| over all nodes.
double martingale_defect(const ScenarioTree& tree, const SolutionGrid& sol);

}  // namespace jumpbsde
