#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "jumpbsde/mc_solver.hpp"

using namespace jumpbsde;

namespace {

McOptions quick(std::size_t paths, std::size_t bootstrap = 20) {
  McOptions o;
  o.paths = paths;
  o.bootstrap = bootstrap;
  o.seed = 17;
  return o;
}

}  // namespace

TEST(RegressionBasis, Dimension) {
  EXPECT_EQ(basis_dimension(1, 3), 4u);
  EXPECT_EQ(basis_dimension(2, 2), 6u);
  EXPECT_EQ(basis_dimension(3, 3), 20u);
  EXPECT_EQ(basis_dimension(4, 0), 1u);
}

TEST(SolveMc, TooFewPaths) {
  const LevyModel m(0.0, 1.0, {});
  McOptions o = quick(30, 0);
  o.basis.degree = 3;  // 4 functions need 40 paths
  EXPECT_THROW(solve_mc(m, TimeGrid(1.0, 2), make_generator("zero"), make_terminal("W_T"), o), std::invalid_argument);
  o.paths = 40;
  EXPECT_NO_THROW(solve_mc(m, TimeGrid(1.0, 2), make_generator("zero"), make_terminal("W_T"), o));
}

TEST(SolveMc, MartingaleMeanZero) {
  const McSolution s = solve_mc(LevyModel(0.0, 1.0, {}), TimeGrid(1.0, 5), make_generator("zero"),
                                make_terminal("W_T"), quick(20000));
  EXPECT_GT(s.y0_bootstrap_se, 0.0);
  EXPECT_LE(std::abs(s.y0), 3.0 * s.y0_bootstrap_se);
  // Z ~ 1 at every step
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(s.summary[i].z_mean, 1.0, 0.05);
}

TEST(SolveMc, ClosedFormLinear) {
  const double k = 0.7;
  McOptions o = quick(100000, 0);
  const McSolution s =
      solve_mc(LevyModel(0.0, 0.0, {}), TimeGrid(1.0, 100), make_generator("linear_y", {.k = k}), make_terminal("one"), o);
  EXPECT_NEAR(s.y0, std::exp(k), 0.02 * std::exp(k));
  EXPECT_NEAR(s.y0, std::pow(1.0 - k / 100.0, -100), 1e-9);
  // X is deterministic, so the regression falls back to lower degree
  EXPECT_TRUE(s.degree_reduced);
}

TEST(SolveMc, ExplicitSchemeCloseToImplicit) {
  McOptions o = quick(2000, 0);
  const TimeGrid g(1.0, 200);
  const LevyModel m(0.0, 0.0, {});
  const double imp = solve_mc(m, g, make_generator("linear_y", {.k = 1.0}), make_terminal("one"), o).y0;
  o.scheme = McScheme::Explicit;
  const double exp = solve_mc(m, g, make_generator("linear_y", {.k = 1.0}), make_terminal("one"), o).y0;
  EXPECT_NEAR(exp, std::pow(1.0 + 1.0 / 200.0, 200), 1e-9);
  EXPECT_LT(exp, imp);
  EXPECT_NEAR(exp, imp, 0.02);
}

TEST(SolveMc, MatchesTreeOnSmallInstance) {
  const LevyModel m(0.0, 0.5, {{0.5, 1.0}});
  const TimeGrid g(1.0, 4);
  const GeneratorSpec f = make_generator("intro_example");
  const TerminalFunctional xi = make_terminal("X_T");
  const double tree = solve_backward(ScenarioTree::build(m, g), f, xi).Y[0][0];
  McOptions o = quick(50000, 30);
  o.law = IncrementLaw::Lattice;
  o.basis.features = {"W", "N"};
  const McSolution s = solve_mc(m, g, f, xi, o);
  EXPECT_LE(std::abs(s.y0 - tree), 3.0 * s.y0_bootstrap_se);
}

TEST(SolveMc, ReproducibleForFixedSeed) {
  const LevyModel m(0.0, 0.5, {{0.5, 1.0}});
  const TimeGrid g(1.0, 3);
  const McSolution a = solve_mc(m, g, make_generator("intro_example"), make_terminal("tanh_X"), quick(3000, 5));
  const McSolution b = solve_mc(m, g, make_generator("intro_example"), make_terminal("tanh_X"), quick(3000, 5));
  EXPECT_EQ(a.y0, b.y0);
  EXPECT_EQ(a.y0_bootstrap_se, b.y0_bootstrap_se);
  std::ostringstream os;
  a.write_csv(os);
  EXPECT_EQ(os.str().rfind("step,Y_mean,Y_se,Z_mean,U_1_mean,degree", 0), 0u);
}

TEST(SolveMc, SummaryAndPaths) {
  McOptions o = quick(500, 0);
  o.keep_paths = true;
  const LevyModel m(0.0, 0.5, {{0.5, 1.0}, {1.5, 0.5}});
  const McSolution s = solve_mc(m, TimeGrid(1.0, 3), make_generator("zero"), make_terminal("X_T"), o);
  ASSERT_EQ(s.summary.size(), 4u);
  EXPECT_EQ(s.Y.size(), 500u * 4u);
  EXPECT_EQ(s.Z.size(), 500u * 3u);
  EXPECT_EQ(s.U.size(), 500u * 3u * 2u);
}

TEST(SolveMc, RepresentationCoefficientsOfLinearTerminal) {
  // xi = X_T with f = 0: Z = sigma and U_j = x_j up to sampling error
  const LevyModel m(0.0, 0.5, {{0.5, 1.0}, {1.5, 0.5}});
  const McSolution s = solve_mc(m, TimeGrid(1.0, 3), make_generator("zero"), make_terminal("X_T"), quick(20000, 0));
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(s.summary[i].z_mean, 0.5, 0.05);
    EXPECT_NEAR(s.summary[i].u_mean[0], 0.5, 0.1);
    EXPECT_NEAR(s.summary[i].u_mean[1], 1.5, 0.1);
  }
  // Y_0 = E X_T = 0.5 * 1.5
  EXPECT_NEAR(s.y0, 0.75, 0.05);
}

TEST(L2Distance, McIdenticalAndOffset) {
  McOptions o = quick(400, 0);
  o.keep_paths = true;
  const LevyModel m(0.0, 0.5, {{0.5, 1.0}});
  const TimeGrid g(2.0, 4);
  const McSolution a = solve_mc(m, g, make_generator("zero"), make_terminal("tanh_X"), o);
  const L2Distance d0 = l2_distance(a, a, m, g);
  EXPECT_EQ(d0.dY, 0.0);
  EXPECT_EQ(d0.dZ, 0.0);
  EXPECT_EQ(d0.dU, 0.0);
  McSolution b = a;
  for (double& y : b.Y) y += 0.3;
  const L2Distance d = l2_distance(a, b, m, g);
  EXPECT_NEAR(d.dY, 0.09 * 2.0, 1e-12);
  EXPECT_EQ(d.dZ, 0.0);

  McOptions nokeep = quick(400, 0);
  const McSolution c = solve_mc(m, g, make_generator("zero"), make_terminal("tanh_X"), nokeep);
  EXPECT_THROW(l2_distance(a, c, m, g), std::invalid_argument);
}

TEST(L2Distance, TreeTruncationLevels) {
  // jump-only model: the n = 1 solution drops both marks, n = 4 only the small one
  const LevyModel m(0.0, 0.0, {{0.05, 2.0}, {0.5, 1.0}});
  const ScenarioTree t = ScenarioTree::build(m, TimeGrid(1.0, 4));
  const GeneratorSpec f = make_generator("zero");
  const TerminalFunctional xi = make_terminal("X_T");
  const SolutionGrid full = solve_backward(t, f, xi);
  const SolutionGrid s1 = solve_truncated(t, f, xi, 1);
  const SolutionGrid s4 = solve_truncated(t, f, xi, 4);
  const L2Distance d1 = l2_distance(t, s1, full);
  const L2Distance d4 = l2_distance(t, s4, full);
  EXPECT_GT(d4.dY, 0.0);
  EXPECT_GT(d1.dY, d4.dY);
  // f = 0 and xi = X_T: Y = X_t and E_n X_t removes exactly the dropped compensated parts,
  // so dY = sum_i dt sum_removed x_j^2 lambda_j t_i
  const double dt = 0.25;
  double expect4 = 0.0, expect1 = 0.0;
  for (int i = 0; i < 4; ++i) {
    expect4 += dt * 0.05 * 0.05 * 2.0 * (i * dt);
    expect1 += dt * (0.05 * 0.05 * 2.0 + 0.5 * 0.5 * 1.0) * (i * dt);
  }
  // Bernoulli variance lambda dt (1 - lambda dt) per step instead of lambda dt
  double b4 = 0.0, b1 = 0.0;
  for (int i = 0; i < 4; ++i) {
    b4 += dt * 0.05 * 0.05 * i * (2.0 * dt) * (1 - 2.0 * dt);
    b1 += dt * i * (0.05 * 0.05 * (2.0 * dt) * (1 - 2.0 * dt) + 0.25 * dt * (1 - dt));
  }
  EXPECT_NEAR(d4.dY, b4, 1e-15);
  EXPECT_NEAR(d1.dY, b1, 1e-15);
  EXPECT_LT(d4.dY, expect4);
  EXPECT_LT(d1.dY, expect1);
  const L2Distance same = l2_distance(t, full, full);
  EXPECT_EQ(same.dY + same.dZ + same.dU, 0.0);
}
