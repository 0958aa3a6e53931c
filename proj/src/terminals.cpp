#include "jumpbsde/terminals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jumpbsde {

namespace {

using Eval = std::function<double(const PathContext&)>;

Eval base_terminal(const std::string& name, const TerminalParams& p) {
  if (name == "X_T") return [](const PathContext& c) { return c.x; };
  if (name == "W_T") return [](const PathContext& c) { return c.w; };
  if (name == "one") return [](const PathContext&) { return 1.0; };
  if (name == "zero") return [](const PathContext&) { return 0.0; };
  if (name == "constant") return [v = p.value](const PathContext&) { return v; };
  if (name == "jump_indicator") {
    return [marks = p.marks, k = p.min_count](const PathContext& c) {
      for (std::size_t j : marks) {
        if (j >= c.jump_counts.size()) throw std::invalid_argument("jump_indicator: mark index out of range");
        if (c.jump_counts[j] < k) return 0.0;
      }
      return 1.0;
    };
  }
  if (name == "tanh_X") return [](const PathContext& c) { return std::tanh(c.x); };
  if (name == "capped_call") {
    return [strike = p.strike, cap = p.cap](const PathContext& c) {
      return std::min(std::max(c.x - strike, 0.0), cap);
    };
  }
  throw std::invalid_argument("unknown terminal functional '" + name + "'");
}

}  // namespace

std::vector<std::string> terminal_names() {
  return {"X_T", "W_T", "one", "zero", "constant", "jump_indicator", "tanh_X", "capped_call"};
}

TerminalFunctional make_terminal(const std::string& name, const TerminalParams& params) {
  Eval f = base_terminal(name, params);
  if (params.scale == 1.0) return {name, std::move(f)};
  return {name, [f = std::move(f), s = params.scale](const PathContext& c) { return s * f(c); }};
}

TerminalFunctional sum(std::vector<TerminalFunctional> terms) {
  std::string name;
  for (const auto& t : terms) name += (name.empty() ? "" : "+") + t.name;
  return {name, [terms = std::move(terms)](const PathContext& c) {
            double s = 0.0;
            for (const auto& t : terms) s += t(c);
            return s;
          }};
}

}  // namespace jumpbsde
