#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jumpbsde/estimates.hpp"
#include "jumpbsde/generators.hpp"
#include "jumpbsde/lattice.hpp"
#include "jumpbsde/levy_model.hpp"
#include "jumpbsde/mc_solver.hpp"
#include "jumpbsde/terminals.hpp"

namespace jumpbsde {

/// One BSDE instance: model, grid, generator, terminal value.
struct Instance {
  std::string label;
  LevyModel model;
  TimeGrid grid{1.0, 1};
  GeneratorSpec g;
  TerminalFunctional xi;
  RegressionBasis basis{};
};

/// Two BSDEs on the same model and grid, expected to satisfy Y <= Y'.
struct ComparisonCase {
  std::string label;
  LevyModel model;
  TimeGrid grid{1.0, 1};
  GeneratorSpec f, f2;
  TerminalFunctional xi, xi2;
};

struct ExperimentOptions {
  FixedPointOptions fixed_point{};
  /// Slack of Y <= Y'; defaults to 10x the fixed-point tolerance.
  double comparison_tol = 1e-11;
  SamplerConfig sampler{};
  std::size_t node_cap = kDefaultNodeCap;
};

/// Machine-readable result of an experiment. Every asserted inequality carries lhs and rhs.
struct Report {
  std::string experiment;
  nlohmann::json cases = nlohmann::json::array();
  nlohmann::json info = nlohmann::json::object();
  int verdicts = 0;
  int failures = 0;
  int preconditions_unmet = 0;
  double seconds = 0.0;

  explicit Report(std::string name = "") : experiment(std::move(name)) {}

  /// Records an asserted check "lhs <relation> rhs" in case `c`.
  void check(nlohmann::json& c, const std::string& name, double lhs, const std::string& relation, double rhs,
             bool passed);
  /// Marks case `c` as not meeting its hypotheses: it carries no verdict.
  void unmet(nlohmann::json& c, const std::vector<std::string>& reasons);
  void add(nlohmann::json c) { cases.push_back(std::move(c)); }

  bool passed() const { return failures == 0; }
  /// Report as JSON; the wall-clock time is the only field that varies between reruns.
  nlohmann::json to_json() const;
};

// ---------------------------------------------------------------------------
// Comparison.

struct Violation {
  double max_violation = 0.0;  // max over nodes of Y - Y'
  int level = 0;
  std::size_t node = 0;
  double y = 0.0, y2 = 0.0;
};

/// Node-wise max of Y - Y' over all levels.
Violation comparison_violation(const ScenarioTree& tree, const SolutionGrid& a, const SolutionGrid& b);

/// Solves both sides of every case on its tree and asserts Y <= Y' + comparison_tol, after
/// checking f <= f' (sampled), xi <= xi' (leaf-wise) and (A gamma) for f or f'.
Report run_comparison(const std::vector<ComparisonCase>& cases, const ExperimentOptions& opts);

/// Max violation of one case at each step count; asserts that its positive part does not grow
/// as dt is halved.
Report run_comparison_refinement(const ComparisonCase& base, const std::vector<int>& steps_list,
                                 const ExperimentOptions& opts);
void add_refinement(Report& report, const ComparisonCase& base, const std::vector<int>& steps_list,
                    const ExperimentOptions& opts);

/// Catalog pair suite (at least 10 pairs) on which the discrete scheme keeps nonnegative weights.
std::vector<ComparisonCase> default_comparison_suite();

/// (A gamma)-boundary generator with two marks able to jump in the same step: the discrete
/// scheme shows a violation of order dt.
ComparisonCase boundary_comparison_case(int steps);

// ---------------------------------------------------------------------------
// Counterexample.

struct CounterexampleInstance {
  double lambda = 0.5;
  int steps = 1;
  int min_count = 1;
  double horizon = 1.0;
  double size = 0.5;
};

/// sigma = 0, one mark; f = f' = catalog generator `generator`; xi = 0 <= xi' = 1{N_T >= min_count}.
ComparisonCase counterexample_case(const CounterexampleInstance& inst, const std::string& generator);

struct CounterexampleSearch {
  CounterexampleInstance best;
  double best_margin = 0.0;
  std::size_t candidates = 0;
  std::size_t violating = 0;
};

/// Brute force over lambda in {0.5, 1, 2}, steps 1..6, min_count 1..3 (lambda dt < 1 only).
CounterexampleSearch search_counterexample(const ExperimentOptions& opts);

/// Frozen result of search_counterexample.
CounterexampleInstance default_counterexample();

/// Violator instance must show Y > Y' + margin_factor * tol somewhere; the boundary generator
/// on the same instance must not violate.
Report run_counterexample(const CounterexampleInstance& inst, const ExperimentOptions& opts,
                          double margin_factor = 100.0);

// ---------------------------------------------------------------------------
// Truncation, a-priori, stability, convergence.

/// Distances of solve_truncated(n) to the full solution for each n (increasing). Asserts
/// non-increase across levels and zero once every mark is kept (else <= tolerance).
Report run_truncation_study(const Instance& inst, const std::vector<int>& levels, double tolerance,
                            const ExperimentOptions& opts);

/// Path-wise data measured on a tree.
struct DataMeasures {
  double C_K = 0.0;    // max over leaves of sum_i dt (K1 + K2^2)
  double e_xi2 = 0.0;  // E |xi|^2
  double e_IF2 = 0.0;  // E (sum_i dt F)^2
};

DataMeasures measure_data(const ScenarioTree& tree, const GeneratorSpec& g, const TerminalFunctional& xi);

/// Tree norms vs the explicit a-priori bounds, for each instance whose declared conditions hold.
Report run_apriori_check(const std::vector<Instance>& instances, const ExperimentOptions& opts);

/// Catalog sweep for the a-priori check.
std::vector<Instance> default_apriori_suite();

struct StabilityMeasurement {
  double lhs = 0.0;    // sup_i E|dY_i|^2 + ||dZ||^2 + ||dU||^2
  double delta = 0.0;  // E|dxi|^2 + 2 E sum_i dt |dY_i| |f - f'|(Y_i, Z_i, U_i)
  double a = 0.0;      // sum_i dt alpha'(t_i)
  double b = 0.0;      // max over leaves of sum_i dt beta'^2
  double bound = 0.0;
};

/// Stability bound evaluated with measured quantities for (xi, f) against (xi2, f2).
StabilityMeasurement measure_stability(const ComparisonCase& pair, const ExperimentOptions& opts);

/// Empirical order of a sequence of errors at the given step counts (least-squares slope of
/// -log err against log N).
double empirical_order(const std::vector<int>& steps, const std::vector<double>& errors);

struct McCheck {
  std::size_t paths = 100000;
  std::size_t bootstrap = 50;
  std::uint64_t seed = 1;
  int steps = 10;
};

/// Y_0 along steps_list, |Y_0(N) - Y_0(2N)| and its fitted order, errors against a reference with
/// an optional asserted order, and optionally an MC-vs-tree gap check.
Report run_convergence(const Instance& inst, const std::vector<int>& steps_list, std::optional<double> reference,
                       std::optional<double> expected_order, std::optional<McCheck> mc,
                       const ExperimentOptions& opts);

/// Tree-feasible instances covering the catalog, for MC-vs-oracle checks.
std::vector<Instance> default_mc_oracle_suite();

struct OracleGap {
  double tree_y0 = 0.0;
  double mc_y0 = 0.0;
  double se = 0.0;
  double floor = 0.0;   // 2 (N+1) tol max(1, |Y0|)
  bool within = false;  // |gap| <= 3 se + floor
};

/// Solves inst on the tree and by MC with lattice increments.
OracleGap mc_oracle_gap(const Instance& inst, const McCheck& mc, const ExperimentOptions& opts);

}  // namespace jumpbsde
