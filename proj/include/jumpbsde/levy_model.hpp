#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace jumpbsde {

/// A jump size together with its Poisson intensity: one atom of the Levy measure.
struct Mark {
  double size = 0.0;
  double intensity = 0.0;

  bool operator==(const Mark&) const = default;
};

/// Finite-activity Levy model  X_t = a t + sigma W_t + (compensated small jumps) + (raw large jumps),
/// with Levy measure nu = sum_j intensity_j * delta_{size_j}.
///
/// Marks with |size| <= 1 enter X through their compensated counts, marks with |size| > 1
/// through raw counts. The mark order is preserved by every operation in the library.
class LevyModel {
 public:
  LevyModel() = default;
  LevyModel(double drift, double sigma, std::vector<Mark> marks);

  double drift() const { return drift_; }
  double sigma() const { return sigma_; }
  const std::vector<Mark>& marks() const { return marks_; }
  std::size_t mark_count() const { return marks_.size(); }

  /// nu(R \ {0}) = sum of intensities.
  double total_intensity() const;

  /// True when mark j enters X through its compensated count (|x_j| <= 1).
  bool is_compensated(std::size_t j) const;

  /// E[X_t] = a t + t * sum_{|x_j| > 1} lambda_j x_j.
  double mean(double t) const;

  bool operator==(const LevyModel&) const = default;

 private:
  double drift_ = 0.0;
  double sigma_ = 0.0;
  std::vector<Mark> marks_;
};

/// Uniform grid t_i = i * T / N on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double dt() const { return horizon_ / steps_; }
  double time(int i) const { return horizon_ * i / steps_; }

  /// max_j lambda_j dt < 1, required by the Bernoulli (tree) discretization.
  bool admits_lattice(const LevyModel& model) const;

 private:
  double horizon_;
  int steps_;
};

/// An element of L^2(nu): one value per jump mark.
class JumpVector {
 public:
  JumpVector() = default;
  explicit JumpVector(std::size_t marks, double value = 0.0) : values_(marks, value) {}
  JumpVector(std::initializer_list<double> values) : values_(values) {}
  explicit JumpVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double& operator[](std::size_t j) { return values_[j]; }
  double operator[](std::size_t j) const { return values_[j]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  bool operator==(const JumpVector&) const = default;

 private:
  std::vector<double> values_;
};

/// sqrt(sum_j lambda_j u_j^2). Throws std::invalid_argument on dimension mismatch.
double levy_norm(const JumpVector& u, const LevyModel& model);

/// Read-only view of the driving path at a time point: what an adapted generator may depend on.
struct PathContext {
  const LevyModel* model = nullptr;
  double x = 0.0;                      // X_t
  double w = 0.0;                      // W_t
  std::span<const int> jump_counts{};  // N_t per mark
};

/// Removes the marks with |x_j| < 1/n; the boundary |x_j| = 1/n is kept.
LevyModel truncate_model(const LevyModel& model, int n);

/// Sampling law of the per-step increments.
enum class IncrementLaw {
  /// dW ~ Normal(0, dt), dN_j ~ Poisson(lambda_j dt).
  Continuous,
  /// dW = +-sqrt(dt) with probability 1/2, dN_j ~ Bernoulli(lambda_j dt): the scenario-tree law.
  Lattice,
};

/// Simulated increments of W and of the jump counts, stored path-major.
class PathBundle {
 public:
  PathBundle(LevyModel model, TimeGrid grid, std::size_t paths, IncrementLaw law);

  const LevyModel& model() const { return model_; }
  const TimeGrid& grid() const { return grid_; }
  IncrementLaw law() const { return law_; }
  std::size_t paths() const { return paths_; }
  int steps() const { return grid_.steps(); }
  std::size_t marks() const { return model_.mark_count(); }

  double dW(std::size_t path, int step) const { return dw_[path * steps() + step]; }
  int dN(std::size_t path, int step, std::size_t mark) const {
    return dn_[(path * steps() + step) * marks() + mark];
  }
  double& dW(std::size_t path, int step) { return dw_[path * steps() + step]; }
  int& dN(std::size_t path, int step, std::size_t mark) {
    return dn_[(path * steps() + step) * marks() + mark];
  }

  /// dN - lambda_j dt.
  double compensated(std::size_t path, int step, std::size_t mark) const;

  /// Increment of X over step i of the given path.
  double dX(std::size_t path, int step) const;

  /// X_T reconstructed from the increments.
  double terminal_x(std::size_t path) const;

  /// Exact variance of a compensated increment under this bundle's law.
  double compensated_variance(std::size_t mark) const;

  /// Bundle made of the given paths of this one, in order (used for bootstrap resampling).
  PathBundle select(std::span<const std::size_t> indices) const;

  void write_csv(std::ostream& out) const;

 private:
  LevyModel model_;
  TimeGrid grid_;
  std::size_t paths_;
  IncrementLaw law_;
  std::vector<double> dw_;
  std::vector<int> dn_;
};

/// Seed of the independent stream owned by path `path` under root seed `seed`.
/// Path i draws from the same stream whatever the total path count.
std::uint64_t path_stream_seed(std::uint64_t seed, std::uint64_t path);

/// Simulates `count` paths. Path i uses the stream seeded by path_stream_seed(seed, i).
/// Throws std::invalid_argument when count == 0, or when the lattice law is requested
/// on a grid with lambda_j dt >= 1.
PathBundle simulate_paths(const LevyModel& model, const TimeGrid& grid, std::size_t count,
                          std::uint64_t seed, IncrementLaw law = IncrementLaw::Continuous);

}  // namespace jumpbsde
