#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "jumpbsde/levy_model.hpp"

using namespace jumpbsde;

namespace {

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

template <class F>
Moments moments(std::size_t n, F&& sample) {
  double s = 0.0, s2 = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double v = sample(p);
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt((s2 / n - m * m) / n)};
}

}  // namespace

TEST(LevyModel, RejectsBadParameters) {
  EXPECT_THROW(LevyModel(0.0, -1.0, {}), std::invalid_argument);
  EXPECT_THROW(LevyModel(0.0, 1.0, {{0.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(LevyModel(0.0, 1.0, {{0.5, -1.0}}), std::invalid_argument);
  EXPECT_THROW(TimeGrid(1.0, 0), std::invalid_argument);
  EXPECT_THROW(TimeGrid(0.0, 4), std::invalid_argument);
}

TEST(LevyModel, CompensationSplitsAtOne) {
  const LevyModel m(0.0, 0.0, {{0.5, 1.0}, {-1.0, 1.0}, {1.5, 2.0}, {-3.0, 0.5}});
  EXPECT_TRUE(m.is_compensated(0));
  EXPECT_TRUE(m.is_compensated(1));
  EXPECT_FALSE(m.is_compensated(2));
  EXPECT_FALSE(m.is_compensated(3));
  EXPECT_DOUBLE_EQ(m.total_intensity(), 4.5);
  // only the raw marks contribute to the mean: 2 * 1.5 + 0.5 * (-3)
  EXPECT_DOUBLE_EQ(m.mean(2.0), 2.0 * 1.5);
}

TEST(LevyModel, TruncationKeepsBoundaryMarks) {
  const LevyModel m(0.1, 0.2, {{0.05, 1.0}, {0.5, 1.0}});
  const LevyModel m4 = truncate_model(m, 4);
  ASSERT_EQ(m4.mark_count(), 1u);
  EXPECT_DOUBLE_EQ(m4.marks()[0].size, 0.5);
  EXPECT_DOUBLE_EQ(m4.drift(), 0.1);
  EXPECT_DOUBLE_EQ(m4.sigma(), 0.2);
  EXPECT_EQ(truncate_model(m, 100), m);

  const LevyModel b(0.0, 0.0, {{-0.2, 3.0}});
  EXPECT_EQ(truncate_model(b, 5), b);
  EXPECT_EQ(truncate_model(b, 4).mark_count(), 0u);
}

TEST(LevyNorm, Values) {
  const LevyModel one(0.0, 0.0, {{0.5, 4.0}});
  EXPECT_DOUBLE_EQ(levy_norm(JumpVector{0.0}, one), 0.0);
  EXPECT_DOUBLE_EQ(levy_norm(JumpVector{3.0}, one), 6.0);
  const LevyModel two(0.0, 0.0, {{0.5, 1.0}, {0.7, 2.0}});
  EXPECT_NEAR(levy_norm(JumpVector{1.0, 1.0}, two), std::sqrt(3.0), 1e-15);
  EXPECT_THROW(levy_norm(JumpVector{1.0}, two), std::invalid_argument);
}

TEST(Simulation, DeterministicDrift) {
  const LevyModel m(1.0, 0.0, {});
  for (int n : {1, 7, 32}) {
    const PathBundle b = simulate_paths(m, TimeGrid(1.0, n), 50, 3);
    for (std::size_t p = 0; p < b.paths(); ++p) EXPECT_NEAR(b.terminal_x(p), 1.0, 1e-14);
  }
}

TEST(Simulation, PoissonCountMean) {
  const LevyModel m(0.0, 0.0, {{2.0, 1.0}});
  const PathBundle b = simulate_paths(m, TimeGrid(1.0, 10), 100000, 11);
  const Moments mo = moments(b.paths(), [&](std::size_t p) {
    int c = 0;
    for (int i = 0; i < b.steps(); ++i) c += b.dN(p, i, 0);
    return static_cast<double>(c);
  });
  EXPECT_LE(std::abs(mo.mean - 1.0), 3.0 * mo.se);
}

TEST(Simulation, TerminalMeanOnlyCountsRawMarks) {
  const LevyModel m(0.5, 1.0, {{0.5, 2.0}, {3.0, 0.1}});
  // independent oracle: a T + T * sum over raw marks of lambda x
  const double expect = 0.5 + 0.1 * 3.0;
  EXPECT_DOUBLE_EQ(m.mean(1.0), expect);
  for (auto law : {IncrementLaw::Continuous, IncrementLaw::Lattice}) {
    const PathBundle b = simulate_paths(m, TimeGrid(1.0, 8), 100000, 5, law);
    const Moments mo = moments(b.paths(), [&](std::size_t p) { return b.terminal_x(p); });
    EXPECT_LE(std::abs(mo.mean - expect), 3.0 * mo.se);
  }
}

TEST(Simulation, TerminalStateIsSumOfIncrements) {
  const LevyModel m(0.2, 0.7, {{0.4, 1.5}, {-2.0, 0.3}});
  const PathBundle b = simulate_paths(m, TimeGrid(2.0, 6), 200, 9);
  const double dt = b.grid().dt();
  for (std::size_t p = 0; p < b.paths(); ++p) {
    double x = 0.0;
    for (int i = 0; i < b.steps(); ++i) {
      x += 0.2 * dt + 0.7 * b.dW(p, i);
      x += 0.4 * (b.dN(p, i, 0) - 1.5 * dt);
      x += -2.0 * b.dN(p, i, 1);
    }
    EXPECT_NEAR(b.terminal_x(p), x, 1e-12);
  }
}

TEST(Simulation, LatticeLawIncrements) {
  const LevyModel m(0.0, 1.0, {{0.5, 2.0}});
  const TimeGrid g(1.0, 4);
  const PathBundle b = simulate_paths(m, g, 1000, 2, IncrementLaw::Lattice);
  for (std::size_t p = 0; p < b.paths(); ++p)
    for (int i = 0; i < b.steps(); ++i) {
      EXPECT_DOUBLE_EQ(std::abs(b.dW(p, i)), std::sqrt(g.dt()));
      EXPECT_TRUE(b.dN(p, i, 0) == 0 || b.dN(p, i, 0) == 1);
    }
  EXPECT_DOUBLE_EQ(b.compensated_variance(0), 0.5 * 0.5);
  EXPECT_THROW(simulate_paths(m, TimeGrid(1.0, 2), 10, 1, IncrementLaw::Lattice), std::invalid_argument);
  EXPECT_NO_THROW(simulate_paths(m, TimeGrid(1.0, 2), 10, 1, IncrementLaw::Continuous));
}

TEST(Simulation, PathStreamsAreIndependentOfCount) {
  const LevyModel m(0.0, 1.0, {{0.5, 1.0}});
  const TimeGrid g(1.0, 5);
  const PathBundle small = simulate_paths(m, g, 10, 42);
  const PathBundle large = simulate_paths(m, g, 1000, 42);
  for (std::size_t p = 0; p < 10; ++p)
    for (int i = 0; i < 5; ++i) {
      EXPECT_EQ(small.dW(p, i), large.dW(p, i));
      EXPECT_EQ(small.dN(p, i, 0), large.dN(p, i, 0));
    }
  const PathBundle other = simulate_paths(m, g, 10, 43);
  EXPECT_NE(small.dW(0, 0), other.dW(0, 0));
  EXPECT_THROW(simulate_paths(m, g, 0, 1), std::invalid_argument);
}

TEST(Simulation, SelectAndCsv) {
  const LevyModel m(0.0, 1.0, {{0.5, 1.0}});
  const PathBundle b = simulate_paths(m, TimeGrid(1.0, 3), 5, 1);
  const std::vector<std::size_t> idx{4, 4, 0};
  const PathBundle s = b.select(idx);
  ASSERT_EQ(s.paths(), 3u);
  EXPECT_EQ(s.dW(0, 2), b.dW(4, 2));
  EXPECT_EQ(s.dW(1, 2), b.dW(4, 2));
  EXPECT_EQ(s.dN(2, 1, 0), b.dN(0, 1, 0));

  std::ostringstream os;
  b.write_csv(os);
  const std::string csv = os.str();
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 5 * 3);
}

TEST(TimeGrid, LatticeAdmissibility) {
  const LevyModel m(0.0, 0.0, {{0.5, 2.0}});
  EXPECT_FALSE(TimeGrid(1.0, 2).admits_lattice(m));
  EXPECT_TRUE(TimeGrid(1.0, 3).admits_lattice(m));
  EXPECT_DOUBLE_EQ(TimeGrid(2.0, 8).time(3), 0.75);
}
