#pragma once

#include <functional>
#include <string>
#include <vector>

#include "jumpbsde/levy_model.hpp"

namespace jumpbsde {

/// Terminal condition xi as a function of the path state at T.
struct TerminalFunctional {
  std::string name;
  std::function<double(const PathContext&)> eval;

  double operator()(const PathContext& ctx) const { return eval(ctx); }
};

struct TerminalParams {
  double value = 1.0;
  double strike = 0.0;
  double cap = 1.0;
  /// Marks that must all have fired at least min_count times (jump_indicator).
  std::vector<std::size_t> marks{0};
  int min_count = 1;
  double scale = 1.0;
};

/// Catalog: "X_T", "W_T", "one", "zero", "constant", "jump_indicator", "tanh_X", "capped_call".
/// Every entry is multiplied by params.scale.
TerminalFunctional make_terminal(const std::string& name, const TerminalParams& params = {});

std::vector<std::string> terminal_names();

/// Pointwise sum of terminal functionals.
TerminalFunctional sum(std::vector<TerminalFunctional> terms);

}  // namespace jumpbsde
