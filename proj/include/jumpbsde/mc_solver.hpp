#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "jumpbsde/generators.hpp"
#include "jumpbsde/lattice.hpp"
#include "jumpbsde/levy_model.hpp"
#include "jumpbsde/terminals.hpp"

namespace jumpbsde {

/// Polynomial basis of total degree <= degree in the standardized regression features.
/// Features: "X" (state), "W" (Brownian path), "N" (one cumulative count per mark).
struct RegressionBasis {
  std::string family = "polynomial";
  int degree = 3;
  std::vector<std::string> features{"X"};
};

/// Number of monomials of total degree <= degree in k variables.
std::size_t basis_dimension(std::size_t k, int degree);

enum class McScheme {
  /// y-argument of f is the solution itself (per-path fixed point), as in the tree solver.
  Implicit,
  /// y-argument of f is the regressed E_i[Y_{i+1}].
  Explicit,
};

struct McOptions {
  std::size_t paths = 100000;
  RegressionBasis basis{};
  std::size_t bootstrap = 50;
  std::uint64_t seed = 1;
  IncrementLaw law = IncrementLaw::Continuous;
  McScheme scheme = McScheme::Implicit;
  bool keep_paths = false;
  FixedPointOptions fixed_point{};
};

struct McStepSummary {
  double y_mean = 0.0;
  double y_se = 0.0;
  double z_mean = 0.0;
  std::vector<double> u_mean;
  /// Degree actually used by the regression at this step (after rank repair).
  int degree = 0;
};

/// Path-indexed solution. Path arrays are filled only with keep_paths; they are stored
/// path-major: Y[path * (N+1) + i], Z[path * N + i], U[(path * N + i) * J + j].
struct McSolution {
  std::size_t paths = 0;
  int steps = 0;
  std::size_t marks = 0;
  double y0 = 0.0;
  double y0_bootstrap_se = 0.0;
  std::vector<McStepSummary> summary;  // one per level 0..N (level N: Y only)
  std::vector<double> Y, Z, U;
  bool degree_reduced = false;

  void write_csv(std::ostream& out) const;
};

/// Least-squares Monte-Carlo backward solver on freshly simulated paths.
/// Throws std::invalid_argument when paths < 10 * basis dimension and std::runtime_error
/// when the design matrix stays rank deficient at degree 0.
McSolution solve_mc(const LevyModel& model, const TimeGrid& grid, const GeneratorSpec& g,
                    const TerminalFunctional& xi, const McOptions& opts);

/// Same, on a given path bundle (no bootstrap unless opts.bootstrap > 0).
McSolution solve_mc(const PathBundle& bundle, const GeneratorSpec& g, const TerminalFunctional& xi,
                    const McOptions& opts);

/// Empirical squared distances E sum_i dt |dY|^2, E sum_i dt |dZ|^2, E sum_i dt sum_j lambda_j |dU_j|^2
/// over levels 0..N-1.
struct L2Distance {
  double dY = 0.0;
  double dZ = 0.0;
  double dU = 0.0;
};

/// Exact distance between two solutions on the same tree. Throws on mismatched shapes.
L2Distance l2_distance(const ScenarioTree& tree, const SolutionGrid& a, const SolutionGrid& b);

/// Path-average distance between two MC solutions on the same bundle (both need keep_paths).
L2Distance l2_distance(const McSolution& a, const McSolution& b, const LevyModel& model, const TimeGrid& grid);

}  // namespace jumpbsde
