#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jumpbsde/experiments.hpp"

namespace jumpbsde {

/// Bad or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat JSON experiment configuration:
///   {experiment, drift, sigma, marks: [{x, lambda}], T, steps,
///    generator, generator2, terminal, terminal2, solver, paths, basis_degree, basis_features,
///    bootstrap, law, truncation_levels, tolerance, comparison_tolerance, seed, steps_list,
///    reference, expected_order, pairs, instances, counterexample, mc, node_cap}
/// Generators and terminals are a catalog name or an object {name, ...params}; a terminal may
/// also be an array of terms that are summed.
struct ExperimentConfig {
  std::string experiment;
  nlohmann::json raw;

  std::optional<LevyModel> model;
  std::optional<TimeGrid> grid;
  std::optional<GeneratorSpec> generator, generator2;
  std::optional<TerminalFunctional> terminal, terminal2;

  std::string solver = "lattice";
  McOptions mc{};
  std::vector<int> truncation_levels;
  double truncation_tolerance = 1e-12;
  std::uint64_t seed = 1;
  std::vector<int> steps_list;
  std::optional<double> reference;
  std::optional<double> expected_order;
  std::optional<McCheck> mc_check;

  std::vector<ComparisonCase> pairs;
  std::vector<Instance> instances;
  std::optional<CounterexampleInstance> counterexample;
  bool search_counterexample = false;

  ExperimentOptions options{};

  /// Instance from the top-level model, grid, generator and terminal. Throws ConfigError.
  Instance instance(const std::string& label) const;
};

LevyModel parse_model(const nlohmann::json& j);
TimeGrid parse_grid(const nlohmann::json& j);
GeneratorSpec parse_generator(const nlohmann::json& j);
TerminalFunctional parse_terminal(const nlohmann::json& j);

/// Throws ConfigError with the offending key in the message.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace jumpbsde
