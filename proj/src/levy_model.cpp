#include "jumpbsde/levy_model.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

namespace jumpbsde {

LevyModel::LevyModel(double drift, double sigma, std::vector<Mark> marks)
    : drift_(drift), sigma_(sigma), marks_(std::move(marks)) {
  if (!std::isfinite(drift_)) throw std::invalid_argument("drift must be finite");
  if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) throw std::invalid_argument("sigma must be >= 0");
  for (std::size_t j = 0; j < marks_.size(); ++j) {
    const Mark& m = marks_[j];
    if (m.size == 0.0 || !std::isfinite(m.size))
      throw std::invalid_argument("mark " + std::to_string(j) + ": jump size must be nonzero");
    if (!(m.intensity > 0.0) || !std::isfinite(m.intensity))
      throw std::invalid_argument("mark " + std::to_string(j) + ": intensity must be > 0");
    for (std::size_t k = 0; k < j; ++k)
      if (marks_[k].size == m.size) throw std::invalid_argument("mark sizes must be distinct");
  }
}

double LevyModel::total_intensity() const {
  double s = 0.0;
  for (const Mark& m : marks_) s += m.intensity;
  return s;
}

bool LevyModel::is_compensated(std::size_t j) const { return std::abs(marks_[j].size) <= 1.0; }

double LevyModel::mean(double t) const {
  double large = 0.0;
  for (std::size_t j = 0; j < marks_.size(); ++j)
    if (!is_compensated(j)) large += marks_[j].intensity * marks_[j].size;
  return drift_ * t + t * large;
}

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be > 0");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
}

bool TimeGrid::admits_lattice(const LevyModel& model) const {
  return std::all_of(model.marks().begin(), model.marks().end(),
                     [&](const Mark& m) { return m.intensity * dt() < 1.0; });
}

double levy_norm(const JumpVector& u, const LevyModel& model) {
  if (u.size() != model.mark_count())
    throw std::invalid_argument("jump vector has " + std::to_string(u.size()) + " entries, model has " +
                                std::to_string(model.mark_count()) + " marks");
  double s = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) s += model.marks()[j].intensity * u[j] * u[j];
  return std::sqrt(s);
}

LevyModel truncate_model(const LevyModel& model, int n) {
  if (n < 1) throw std::invalid_argument("truncation level must be >= 1");
  std::vector<Mark> kept;
  const double cutoff = 1.0 / n;
  for (const Mark& m : model.marks())
    if (std::abs(m.size) >= cutoff) kept.push_back(m);
  return LevyModel(model.drift(), model.sigma(), std::move(kept));
}

PathBundle::PathBundle(LevyModel model, TimeGrid grid, std::size_t paths, IncrementLaw law)
    : model_(std::move(model)),
      grid_(grid),
      paths_(paths),
      law_(law),
      dw_(paths * grid.steps(), 0.0),
      dn_(paths * grid.steps() * model_.mark_count(), 0) {}

double PathBundle::compensated(std::size_t path, int step, std::size_t mark) const {
  return dN(path, step, mark) - model_.marks()[mark].intensity * grid_.dt();
}

double PathBundle::dX(std::size_t path, int step) const {
  const double dt = grid_.dt();
  double dx = model_.drift() * dt + model_.sigma() * dW(path, step);
  for (std::size_t j = 0; j < marks(); ++j) {
    const double count = model_.is_compensated(j) ? compensated(path, step, j) : dN(path, step, j);
    dx += model_.marks()[j].size * count;
  }
  return dx;
}

double PathBundle::terminal_x(std::size_t path) const {
  double x = 0.0;
  for (int i = 0; i < steps(); ++i) x += dX(path, i);
  return x;
}

double PathBundle::compensated_variance(std::size_t mark) const {
  const double p = model_.marks()[mark].intensity * grid_.dt();
  return law_ == IncrementLaw::Lattice ? p * (1.0 - p) : p;
}

PathBundle PathBundle::select(std::span<const std::size_t> indices) const {
  PathBundle out(model_, grid_, indices.size(), law_);
  const std::size_t row_w = steps();
  const std::size_t row_n = steps() * marks();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t p = indices[k];
    std::copy_n(dw_.begin() + p * row_w, row_w, out.dw_.begin() + k * row_w);
    std::copy_n(dn_.begin() + p * row_n, row_n, out.dn_.begin() + k * row_n);
  }
  return out;
}

void PathBundle::write_csv(std::ostream& out) const {
  out << "path,step,dW";
  for (std::size_t j = 0; j < marks(); ++j) out << ",dN_" << (j + 1);
  out << '\n';
  out.precision(17);
  for (std::size_t p = 0; p < paths_; ++p) {
    for (int i = 0; i < steps(); ++i) {
      out << p << ',' << i << ',' << dW(p, i);
      for (std::size_t j = 0; j < marks(); ++j) out << ',' << dN(p, i, j);
      out << '\n';
    }
  }
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t path_stream_seed(std::uint64_t seed, std::uint64_t path) {
  return splitmix64(splitmix64(seed) ^ splitmix64(path + 0x632be59bd9b4e019ULL));
}

PathBundle simulate_paths(const LevyModel& model, const TimeGrid& grid, std::size_t count,
                          std::uint64_t seed, IncrementLaw law) {
  if (count == 0) throw std::invalid_argument("path count must be >= 1");
  if (law == IncrementLaw::Lattice && !grid.admits_lattice(model))
    throw std::invalid_argument("lattice increments need lambda_j * dt < 1 for every mark");

  PathBundle bundle(model, grid, count, law);
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  const std::size_t J = model.mark_count();

  for (std::size_t p = 0; p < count; ++p) {
    std::mt19937_64 rng(path_stream_seed(seed, p));
    std::normal_distribution<double> normal(0.0, sqdt);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::poisson_distribution<int>> poisson;
    if (law == IncrementLaw::Continuous)
      for (const Mark& m : model.marks()) poisson.emplace_back(m.intensity * dt);

    for (int i = 0; i < grid.steps(); ++i) {
      if (model.sigma() > 0.0) {
        if (law == IncrementLaw::Continuous)
          bundle.dW(p, i) = normal(rng);
        else
          bundle.dW(p, i) = unif(rng) < 0.5 ? sqdt : -sqdt;
      }
      for (std::size_t j = 0; j < J; ++j) {
        if (law == IncrementLaw::Continuous)
          bundle.dN(p, i, j) = poisson[j](rng);
        else
          bundle.dN(p, i, j) = unif(rng) < model.marks()[j].intensity * dt ? 1 : 0;
      }
    }
  }
  return bundle;
}

}  // namespace jumpbsde
