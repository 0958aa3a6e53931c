#include "jumpbsde/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace jumpbsde {

using nlohmann::json;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json model_json(const LevyModel& m, const TimeGrid& grid) {
  json marks = json::array();
  for (const Mark& mk : m.marks()) marks.push_back({{"x", mk.size}, {"lambda", mk.intensity}});
  return {{"drift", m.drift()}, {"sigma", m.sigma()}, {"marks", marks}, {"T", grid.horizon()}, {"steps", grid.steps()}};
}

json condition_json(const ConditionReport& r) {
  json j{{"condition", r.condition}, {"passed", r.passed}, {"points", r.points_checked}};
  if (std::isfinite(r.max_excess)) j["max_excess"] = r.max_excess;
  if (!r.note.empty()) j["note"] = r.note;
  if (r.witness) {
    const Witness& w = *r.witness;
    j["witness"] = {{"t", w.t}, {"y", w.y}, {"z", w.z}, {"u", w.u}, {"y2", w.y2}, {"z2", w.z2},
                    {"u2", w.u2}, {"lhs", w.lhs}, {"rhs", w.rhs}};
  }
  return j;
}

/// Solution norms as JSON.
json norms_json(const SolutionNorms& n) {
  return {{"E_sup_Y2", n.sup_y2}, {"Z2", n.z2}, {"U2", n.u2}, {"Y2_L2", n.y2_l2}};
}

/// Applies `fn` to every (level, node) of a tree, level by level.
template <class Fn>
void for_each_node(const ScenarioTree& tree, Fn fn) {
  for (int i = 0; i <= tree.steps(); ++i)
    for (std::size_t k = 0; k < tree.level_size(i); ++k) fn(i, k);
}

struct Preconditions {
  bool met = true;
  json detail = json::object();
  std::vector<std::string> reasons;
};

Preconditions comparison_preconditions(const ComparisonCase& c, const ScenarioTree& tree,
                                       const ExperimentOptions& opts) {
  Preconditions p;
  const ConditionReport dom = check_dominated(c.f, c.f2, c.model, opts.sampler);
  p.detail["f_le_f2"] = condition_json(dom);
  if (!dom.passed) p.reasons.push_back("f <= f' fails on sampled points");

  const std::vector<double> a = tree.terminal_values(c.xi);
  const std::vector<double> b = tree.terminal_values(c.xi2);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, a[k] - b[k]);
  p.detail["xi_le_xi2"] = {{"max_xi_minus_xi2", worst}, {"passed", worst <= 0.0}};
  if (worst > 0.0) p.reasons.push_back("xi <= xi' fails at some leaf");

  const ConditionReport g1 = check_a_gamma(c.f, c.model, opts.sampler);
  const ConditionReport g2 = check_a_gamma(c.f2, c.model, opts.sampler);
  p.detail["a_gamma_f"] = condition_json(g1);
  p.detail["a_gamma_f2"] = condition_json(g2);
  if (!g1.passed && !g2.passed) p.reasons.push_back("neither f nor f' satisfies (A gamma)");
  p.met = p.reasons.empty();
  return p;
}

json case_header(const std::string& label, const LevyModel& m, const TimeGrid& grid) {
  return {{"label", label}, {"model", model_json(m, grid)}};
}

double positive(double v) { return std::max(v, 0.0); }

}  // namespace

// ---------------------------------------------------------------------------

void Report::check(json& c, const std::string& name, double lhs, const std::string& relation, double rhs,
                   bool passed) {
  ++verdicts;
  if (!passed) ++failures;
  if (!c.contains("checks")) c["checks"] = json::array();
  c["checks"].push_back({{"name", name}, {"lhs", lhs}, {"relation", relation}, {"rhs", rhs}, {"passed", passed}});
}

void Report::unmet(json& c, const std::vector<std::string>& reasons) {
  ++preconditions_unmet;
  c["status"] = "preconditions-unmet";
  c["reasons"] = reasons;
}

json Report::to_json() const {
  std::string status = failures > 0 ? "fail" : (verdicts > 0 ? "pass" : "no-verdict");
  return {{"experiment", experiment},
          {"status", status},
          {"verdicts", verdicts},
          {"failures", failures},
          {"preconditions_unmet", preconditions_unmet},
          {"info", info},
          {"cases", cases},
          {"timing", {{"seconds", seconds}}}};
}

// ---------------------------------------------------------------------------
// Comparison.

Violation comparison_violation(const ScenarioTree& tree, const SolutionGrid& a, const SolutionGrid& b) {
  Violation v;
  v.max_violation = -std::numeric_limits<double>::infinity();
  for_each_node(tree, [&](int i, std::size_t k) {
    const double d = a.Y[i][k] - b.Y[i][k];
    if (d > v.max_violation) v = {d, i, k, a.Y[i][k], b.Y[i][k]};
  });
  return v;
}

namespace {

json violation_json(const Violation& v) {
  return {{"max_Y_minus_Y2", v.max_violation}, {"level", v.level}, {"node", v.node}, {"Y", v.y}, {"Y2", v.y2}};
}

}  // namespace

Report run_comparison(const std::vector<ComparisonCase>& cases, const ExperimentOptions& opts) {
  Stopwatch sw;
  Report report("compare");
  report.info["comparison_tol"] = opts.comparison_tol;
  report.info["fixed_point_tol"] = opts.fixed_point.tol;
  for (const ComparisonCase& c : cases) {
    json cj = case_header(c.label, c.model, c.grid);
    cj["generators"] = {c.f.name, c.f2.name};
    cj["terminals"] = {c.xi.name, c.xi2.name};
    try {
      const ScenarioTree tree = ScenarioTree::build(c.model, c.grid, opts.node_cap);
      const Preconditions pre = comparison_preconditions(c, tree, opts);
      cj["preconditions"] = pre.detail;
      if (!pre.met) {
        report.unmet(cj, pre.reasons);
        report.add(std::move(cj));
        continue;
      }
      const SolutionGrid a = solve_backward(tree, c.f, c.xi, opts.fixed_point);
      const SolutionGrid b = solve_backward(tree, c.f2, c.xi2, opts.fixed_point);
      const Violation v = comparison_violation(tree, a, b);
      cj["Y0"] = a.Y[0][0];
      cj["Y2_0"] = b.Y[0][0];
      cj["argmax"] = violation_json(v);
      report.check(cj, "max(Y - Y')", v.max_violation, "<=", opts.comparison_tol,
                   v.max_violation <= opts.comparison_tol);
      if (v.max_violation > opts.comparison_tol) cj["witness"] = violation_json(v);
    } catch (const std::exception& e) {
      cj["error"] = e.what();
      report.check(cj, "solved", 0.0, "==", 1.0, false);
    }
    report.add(std::move(cj));
  }
  report.seconds = sw.seconds();
  return report;
}

void add_refinement(Report& report, const ComparisonCase& base, const std::vector<int>& steps_list,
                    const ExperimentOptions& opts) {
  json cj = case_header(base.label + " (dt refinement)", base.model, base.grid);
  cj["generators"] = {base.f.name, base.f2.name};
  cj["terminals"] = {base.xi.name, base.xi2.name};
  try {
    const ScenarioTree coarse = ScenarioTree::build(base.model, base.grid, opts.node_cap);
    const Preconditions pre = comparison_preconditions(base, coarse, opts);
    cj["preconditions"] = pre.detail;
    if (!pre.met) {
      report.unmet(cj, pre.reasons);
      report.add(std::move(cj));
      return;
    }
    json rows = json::array();
    double previous = std::numeric_limits<double>::infinity();
    int previous_n = 0;
    for (int n : steps_list) {
      const TimeGrid grid(base.grid.horizon(), n);
      const ScenarioTree tree = ScenarioTree::build(base.model, grid, opts.node_cap);
      const SolutionGrid a = solve_backward(tree, base.f, base.xi, opts.fixed_point);
      const SolutionGrid b = solve_backward(tree, base.f2, base.xi2, opts.fixed_point);
      const Violation v = comparison_violation(tree, a, b);
      json row = violation_json(v);
      row["steps"] = n;
      rows.push_back(row);
      const double pos = positive(v.max_violation);
      if (std::isfinite(previous))
        report.check(cj, "violation+(N=" + std::to_string(n) + ") vs violation+(N=" + std::to_string(previous_n) + ")",
                     pos, "<=", previous, pos <= previous);
      previous = pos;
      previous_n = n;
    }
    cj["refinement"] = rows;
  } catch (const std::exception& e) {
    cj["error"] = e.what();
    report.check(cj, "solved", 0.0, "==", 1.0, false);
  }
  report.add(std::move(cj));
}

Report run_comparison_refinement(const ComparisonCase& base, const std::vector<int>& steps_list,
                                 const ExperimentOptions& opts) {
  Stopwatch sw;
  Report report("compare-refinement");
  add_refinement(report, base, steps_list, opts);
  report.seconds = sw.seconds();
  return report;
}

namespace {

LevyModel model_brownian_one_mark() { return LevyModel(0.1, 1.0, {{0.5, 1.0}}); }
LevyModel model_brownian_two_marks() { return LevyModel(0.0, 0.5, {{0.3, 1.0}, {1.5, 0.5}}); }
LevyModel model_pure_jump() { return LevyModel(0.0, 0.0, {{0.4, 2.0}, {-0.8, 1.0}}); }

GeneratorParams linear_params(double a, double b, std::vector<double> c, double offset = 0.0) {
  GeneratorParams p;
  p.a = a;
  p.b = b;
  p.c = std::move(c);
  p.offset = offset;
  return p;
}

GeneratorParams offset_params(double offset) {
  GeneratorParams p;
  p.offset = offset;
  return p;
}

TerminalFunctional constant_terminal(double v) {
  TerminalParams p;
  p.value = v;
  return make_terminal("constant", p);
}

TerminalFunctional indicator(std::vector<std::size_t> marks, int min_count = 1) {
  TerminalParams p;
  p.marks = std::move(marks);
  p.min_count = min_count;
  return make_terminal("jump_indicator", p);
}

ComparisonCase make_case(std::string label, LevyModel m, int steps, GeneratorSpec f, GeneratorSpec f2,
                         TerminalFunctional xi, TerminalFunctional xi2) {
  return ComparisonCase{std::move(label), std::move(m), TimeGrid(1.0, steps), std::move(f), std::move(f2),
                        std::move(xi),    std::move(xi2)};
}

}  // namespace

std::vector<ComparisonCase> default_comparison_suite() {
  std::vector<ComparisonCase> s;
  const auto mA = model_brownian_one_mark();
  const auto mB = model_brownian_two_marks();
  const auto mC = model_pure_jump();
  const auto xT = make_terminal("X_T");
  GeneratorParams k05;
  k05.k = 0.5;
  GeneratorParams k05_shift = k05;
  k05_shift.offset = 0.25;
  GeneratorParams kneg;
  kneg.k = -1.0;

  s.push_back(make_case("identical data", mA, 6, make_generator("zero"), make_generator("zero"), xT, xT));
  s.push_back(make_case("boundary generator shifted by 1", mA, 6, make_generator("a_gamma_boundary"),
                        make_generator("a_gamma_boundary", offset_params(1.0)), xT, xT));
  s.push_back(make_case("linear_y shifted", mA, 6, make_generator("linear_y", k05),
                        make_generator("linear_y", k05_shift), make_terminal("one"), make_terminal("one")));
  s.push_back(make_case("linear driver, terminal shift", mB, 5, make_generator("linear", linear_params(-0.5, 0.3, {0.5})),
                        make_generator("linear", linear_params(-0.5, 0.3, {0.5})), xT,
                        sum({xT, constant_terminal(0.1)})));
  s.push_back(make_case("intro example shifted", mB, 5, make_generator("intro_example"),
                        make_generator("intro_example", offset_params(0.1)), make_terminal("tanh_X"),
                        make_terminal("tanh_X")));
  s.push_back(make_case("capped call below one", mA, 6, make_generator("linear", linear_params(0.2, 0.5, {0.0})),
                        make_generator("linear", linear_params(0.2, 0.5, {0.0})), make_terminal("capped_call"),
                        make_terminal("one")));
  s.push_back(make_case("jump indicator below one", mA, 6, make_generator("a_gamma_boundary"),
                        make_generator("a_gamma_boundary"), indicator({0}), make_terminal("one")));
  s.push_back(make_case("W_T shifted", mA, 6, make_generator("zero"), make_generator("zero"), make_terminal("W_T"),
                        sum({make_terminal("W_T"), constant_terminal(0.5)})));
  s.push_back(make_case("two marks, positive jump coefficients", mC, 6,
                        make_generator("linear", linear_params(0.0, 0.0, {0.5, 2.0})),
                        make_generator("linear", linear_params(0.0, 0.0, {0.5, 2.0})), indicator({0}),
                        make_terminal("one")));
  s.push_back(make_case("decreasing in y, capped call shifted", mC, 6, make_generator("linear_y", kneg),
                        make_generator("linear_y", kneg), make_terminal("capped_call"),
                        sum({make_terminal("capped_call"), constant_terminal(0.2)})));
  s.push_back(make_case("intro example, joint indicator below one", mC, 6, make_generator("intro_example"),
                        make_generator("intro_example"), indicator({0, 1}), make_terminal("one")));
  s.push_back(make_case("zero vs positive constant", mB, 5, make_generator("zero"),
                        make_generator("zero", offset_params(0.3)), make_terminal("tanh_X"), make_terminal("tanh_X")));
  s.push_back(make_case("mild negative jump coefficient", mA, 6, make_generator("linear", linear_params(0.0, 0.0, {-0.5})),
                        make_generator("linear", linear_params(0.0, 0.0, {-0.5})), xT,
                        sum({xT, constant_terminal(0.1)})));
  return s;
}

ComparisonCase boundary_comparison_case(int steps) {
  return make_case("boundary generator, simultaneous jumps", LevyModel(0.0, 0.0, {{0.5, 1.0}, {0.8, 1.0}}), steps,
                   make_generator("a_gamma_boundary"), make_generator("a_gamma_boundary"), make_terminal("zero"),
                   indicator({0, 1}));
}

// ---------------------------------------------------------------------------
// Counterexample.

ComparisonCase counterexample_case(const CounterexampleInstance& inst, const std::string& generator) {
  ComparisonCase c{"counterexample (" + generator + ")",
                   LevyModel(0.0, 0.0, {{inst.size, inst.lambda}}),
                   TimeGrid(inst.horizon, inst.steps),
                   make_generator(generator),
                   make_generator(generator),
                   make_terminal("zero"),
                   indicator({0}, inst.min_count)};
  return c;
}

CounterexampleSearch search_counterexample(const ExperimentOptions& opts) {
  CounterexampleSearch s;
  for (double lambda : {0.5, 1.0, 2.0})
    for (int steps = 1; steps <= 6; ++steps)
      for (int k = 1; k <= 3; ++k) {
        CounterexampleInstance inst;
        inst.lambda = lambda;
        inst.steps = steps;
        inst.min_count = k;
        if (lambda * inst.horizon / steps >= 1.0) continue;
        ++s.candidates;
        const ComparisonCase c = counterexample_case(inst, "a_gamma_violator");
        const ScenarioTree tree = ScenarioTree::build(c.model, c.grid, opts.node_cap);
        const Violation v = comparison_violation(tree, solve_backward(tree, c.f, c.xi, opts.fixed_point),
                                                 solve_backward(tree, c.f2, c.xi2, opts.fixed_point));
        if (v.max_violation > 100.0 * opts.fixed_point.tol) ++s.violating;
        if (v.max_violation > s.best_margin) {
          s.best_margin = v.max_violation;
          s.best = inst;
        }
      }
  return s;
}

CounterexampleInstance default_counterexample() {
  // frozen output of search_counterexample with default options
  CounterexampleInstance inst;
  inst.lambda = 0.5;
  inst.steps = 1;
  inst.min_count = 1;
  return inst;
}

Report run_counterexample(const CounterexampleInstance& inst, const ExperimentOptions& opts, double margin_factor) {
  Stopwatch sw;
  Report report("counterexample");
  const double margin = margin_factor * opts.fixed_point.tol;
  report.info["instance"] = {{"lambda", inst.lambda},
                             {"steps", inst.steps},
                             {"min_count", inst.min_count},
                             {"T", inst.horizon},
                             {"x", inst.size}};
  report.info["required_margin"] = margin;

  auto solve_pair = [&](const ComparisonCase& c) {
    const ScenarioTree tree = ScenarioTree::build(c.model, c.grid, opts.node_cap);
    return comparison_violation(tree, solve_backward(tree, c.f, c.xi, opts.fixed_point),
                                solve_backward(tree, c.f2, c.xi2, opts.fixed_point));
  };

  {
    const ComparisonCase c = counterexample_case(inst, "a_gamma_violator");
    json cj = case_header(c.label, c.model, c.grid);
    cj["terminals"] = {c.xi.name, c.xi2.name};
    cj["a_gamma"] = condition_json(check_a_gamma(c.f, c.model, opts.sampler));
    const Violation v = solve_pair(c);
    cj["witness"] = violation_json(v);
    report.check(cj, "max(Y - Y') exceeds margin", v.max_violation, ">", margin, v.max_violation > margin);
    report.add(std::move(cj));
  }
  {
    const ComparisonCase c = counterexample_case(inst, "a_gamma_boundary");
    json cj = case_header(c.label, c.model, c.grid);
    cj["terminals"] = {c.xi.name, c.xi2.name};
    const Violation v = solve_pair(c);
    cj["argmax"] = violation_json(v);
    report.check(cj, "max(Y - Y')", v.max_violation, "<=", opts.comparison_tol, v.max_violation <= opts.comparison_tol);
    report.add(std::move(cj));
  }
  {
    ComparisonCase c = counterexample_case(inst, "a_gamma_violator");
    c.label = "counterexample (a_gamma_violator, xi = xi')";
    c.xi = c.xi2;
    json cj = case_header(c.label, c.model, c.grid);
    const Violation v = solve_pair(c);
    cj["argmax"] = violation_json(v);
    report.check(cj, "max(Y - Y')", v.max_violation, "<=", opts.comparison_tol, v.max_violation <= opts.comparison_tol);
    report.add(std::move(cj));
  }
  report.seconds = sw.seconds();
  return report;
}

// ---------------------------------------------------------------------------
// Truncation.

Report run_truncation_study(const Instance& inst, const std::vector<int>& levels_in, double tolerance,
                            const ExperimentOptions& opts) {
  Stopwatch sw;
  Report report("truncate-study");
  std::vector<int> levels = levels_in;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  json cj = case_header(inst.label, inst.model, inst.grid);
  cj["generator"] = inst.g.name;
  cj["terminal"] = inst.xi.name;
  cj["levels"] = levels;

  auto removed = [&](int n) { return inst.model.mark_count() - truncate_model(inst.model, n).mark_count(); };
  if (levels.empty() || removed(levels.front()) == 0) {
    report.unmet(cj, {"no mark is removed at any requested truncation level"});
    report.add(std::move(cj));
    report.seconds = sw.seconds();
    return report;
  }

  try {
    const ScenarioTree tree = ScenarioTree::build(inst.model, inst.grid, opts.node_cap);
    const SolutionGrid full = solve_backward(tree, inst.g, inst.xi, opts.fixed_point);
    json rows = json::array();
    std::optional<L2Distance> prev;
    int prev_n = 0;
    for (int n : levels) {
      const SolutionGrid tr = solve_truncated(tree, inst.g, inst.xi, n, opts.fixed_point);
      const L2Distance d = l2_distance(tree, tr, full);
      rows.push_back({{"n", n}, {"marks_removed", removed(n)}, {"dY", d.dY}, {"dZ", d.dZ}, {"dU", d.dU},
                      {"Y0", tr.Y[0][0]}});
      if (prev) {
        const std::string tag = "(n=" + std::to_string(n) + ") vs (n=" + std::to_string(prev_n) + ")";
        auto mono = [&](const std::string& name, double now, double before) {
          const double rhs = before * (1.0 + 1e-12);
          report.check(cj, name + tag, now, "<=", rhs, now <= rhs);
        };
        mono("dY", d.dY, prev->dY);
        mono("dZ", d.dZ, prev->dZ);
        mono("dU", d.dU, prev->dU);
      }
      prev = d;
      prev_n = n;
    }
    cj["distances"] = rows;
    cj["Y0_full"] = full.Y[0][0];
    const double last = prev->dY + prev->dZ + prev->dU;
    if (removed(levels.back()) == 0)
      report.check(cj, "distance at largest n (all marks kept)", last, "==", 0.0, last == 0.0);
    else
      report.check(cj, "distance at largest n", last, "<=", tolerance, last <= tolerance);
  } catch (const std::exception& e) {
    cj["error"] = e.what();
    report.check(cj, "solved", 0.0, "==", 1.0, false);
  }
  report.add(std::move(cj));
  report.seconds = sw.seconds();
  return report;
}

// ---------------------------------------------------------------------------
// A-priori and stability.

DataMeasures measure_data(const ScenarioTree& tree, const GeneratorSpec& g, const TerminalFunctional& xi) {
  const int N = tree.steps();
  const double dt = tree.grid().dt();
  const std::size_t B = tree.branching();
  std::vector<double> k_acc{0.0}, f_acc{0.0};
  for (int i = 0; i < N; ++i) {
    const double t = tree.grid().time(i);
    std::vector<double> k_next(tree.level_size(i + 1)), f_next(tree.level_size(i + 1));
    for (std::size_t k = 0; k < tree.level_size(i); ++k) {
      const PathContext ctx = tree.context(i, k);
      const double K2 = g.coeffs.K2(ctx, t);
      const double kk = k_acc[k] + dt * (g.coeffs.K1(ctx, t) + K2 * K2);
      const double ff = f_acc[k] + dt * g.coeffs.F(ctx, t);
      for (std::size_t b = 0; b < B; ++b) {
        k_next[k * B + b] = kk;
        f_next[k * B + b] = ff;
      }
    }
    k_acc.swap(k_next);
    f_acc.swap(f_next);
  }
  DataMeasures m;
  const std::vector<double> xs = tree.terminal_values(xi);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double p = tree.probability(N, k);
    m.C_K = std::max(m.C_K, k_acc[k]);
    m.e_xi2 += p * xs[k] * xs[k];
    m.e_IF2 += p * f_acc[k] * f_acc[k];
  }
  return m;
}

Report run_apriori_check(const std::vector<Instance>& instances, const ExperimentOptions& opts) {
  Stopwatch sw;
  Report report("apriori");
  for (const Instance& inst : instances) {
    json cj = case_header(inst.label, inst.model, inst.grid);
    cj["generator"] = inst.g.name;
    cj["terminal"] = inst.xi.name;
    try {
      std::vector<std::string> reasons;
      const ConditionReport growth = check_growth(inst.g, inst.model, opts.sampler);
      cj["A2"] = condition_json(growth);
      if (!growth.passed) reasons.push_back("declared growth bound fails");
      if (inst.g.flags.satisfies_A3) {
        const ConditionReport mono = check_monotonicity(inst.g, inst.model, opts.sampler);
        cj["A3"] = condition_json(mono);
        if (!mono.passed) reasons.push_back("declared monotonicity fails");
      }
      if (!reasons.empty()) {
        report.unmet(cj, reasons);
        report.add(std::move(cj));
        continue;
      }
      const ScenarioTree tree = ScenarioTree::build(inst.model, inst.grid, opts.node_cap);
      const SolutionGrid sol = solve_backward(tree, inst.g, inst.xi, opts.fixed_point);
      const SolutionNorms n = solution_norms(tree, sol);
      const DataMeasures d = measure_data(tree, inst.g, inst.xi);
      const AprioriBound b = apriori_bound(d.C_K, d.e_xi2, d.e_IF2);
      cj["norms"] = norms_json(n);
      cj["measured"] = {{"C_K", d.C_K}, {"E_xi2", d.e_xi2}, {"E_IF2", d.e_IF2}};
      cj["constants"] = {{"c1", b.c1}, {"C1", b.C1}};
      report.check(cj, "E sup|Y|^2", n.sup_y2, "<=", b.sup_Y_bound, n.sup_y2 <= b.sup_Y_bound);
      report.check(cj, "||Z||^2 + ||U||^2", n.z2 + n.u2, "<=", b.ZU_bound, n.z2 + n.u2 <= b.ZU_bound);
    } catch (const std::exception& e) {
      cj["error"] = e.what();
      report.check(cj, "solved", 0.0, "==", 1.0, false);
    }
    report.add(std::move(cj));
  }
  report.seconds = sw.seconds();
  return report;
}

std::vector<Instance> default_apriori_suite() {
  const auto mA = model_brownian_one_mark();
  const auto mB = model_brownian_two_marks();
  const auto mC = model_pure_jump();
  const LevyModel brownian(0.0, 1.0, {});
  GeneratorParams k1;
  k1.k = 1.0;
  GeneratorParams kneg;
  kneg.k = -1.0;
  auto inst = [](std::string label, LevyModel m, int steps, GeneratorSpec g, TerminalFunctional xi) {
    return Instance{std::move(label), std::move(m), TimeGrid(1.0, steps), std::move(g), std::move(xi), {}};
  };
  std::vector<Instance> s;
  s.push_back(inst("zero data", mA, 5, make_generator("zero"), make_terminal("zero")));
  s.push_back(inst("martingale W_T", brownian, 10, make_generator("zero"), make_terminal("W_T")));
  s.push_back(inst("martingale X_T", mA, 6, make_generator("zero"), make_terminal("X_T")));
  s.push_back(inst("linear_y growth", mA, 6, make_generator("linear_y", k1), make_terminal("one")));
  s.push_back(inst("linear_y decay, capped call", mC, 6, make_generator("linear_y", kneg),
                   make_terminal("capped_call")));
  s.push_back(inst("linear driver", mB, 5, make_generator("linear", linear_params(0.5, 0.3, {0.5})),
                   make_terminal("X_T")));
  s.push_back(inst("intro example", mB, 5, make_generator("intro_example"), make_terminal("tanh_X")));
  s.push_back(inst("violator generator", mA, 6, make_generator("a_gamma_violator"), make_terminal("X_T")));
  s.push_back(inst("boundary generator, indicator", mC, 6, make_generator("a_gamma_boundary"), indicator({0, 1})));
  s.push_back(inst("constant driver", mA, 6, make_generator("zero", offset_params(0.5)), make_terminal("zero")));
  s.push_back(inst("shifted linear driver", mC, 6, make_generator("linear", linear_params(-0.5, 0.0, {0.5}, 0.3)),
                   make_terminal("tanh_X")));
  return s;
}

StabilityMeasurement measure_stability(const ComparisonCase& pair, const ExperimentOptions& opts) {
  const ScenarioTree tree = ScenarioTree::build(pair.model, pair.grid, opts.node_cap);
  const SolutionGrid a = solve_backward(tree, pair.f, pair.xi, opts.fixed_point);
  const SolutionGrid b = solve_backward(tree, pair.f2, pair.xi2, opts.fixed_point);
  const int N = tree.steps();
  const double dt = tree.grid().dt();
  const std::size_t B = tree.branching();

  StabilityMeasurement m;
  const L2Distance d = l2_distance(tree, a, b);
  double sup_y = 0.0;
  double cross = 0.0;
  std::vector<double> beta_acc{0.0};
  for (int i = 0; i <= N; ++i) {
    double ey = 0.0;
    const double t = tree.grid().time(i);
    std::vector<double> beta_next(i < N ? tree.level_size(i + 1) : 0);
    for (std::size_t k = 0; k < tree.level_size(i); ++k) {
      const double p = tree.probability(i, k);
      const double dy = a.Y[i][k] - b.Y[i][k];
      ey += p * dy * dy;
      if (i == N) continue;
      const PathContext ctx = tree.context(i, k);
      const JumpVector u = a.u_vector(i, k);
      const double df = pair.f(ctx, t, a.Y[i][k], a.Z[i][k], u) - pair.f2(ctx, t, a.Y[i][k], a.Z[i][k], u);
      cross += p * dt * std::abs(dy) * std::abs(df);
      const double beta = pair.f2.coeffs.beta(ctx, t);
      for (std::size_t c = 0; c < B; ++c) beta_next[k * B + c] = beta_acc[k] + dt * beta * beta;
    }
    sup_y = std::max(sup_y, ey);
    if (i < N) {
      beta_acc.swap(beta_next);
      m.a += dt * pair.f2.coeffs.alpha(t);
    }
  }
  const std::vector<double> xa = tree.terminal_values(pair.xi);
  const std::vector<double> xb = tree.terminal_values(pair.xi2);
  double e_dxi2 = 0.0;
  for (std::size_t k = 0; k < xa.size(); ++k) {
    e_dxi2 += tree.probability(N, k) * (xa[k] - xb[k]) * (xa[k] - xb[k]);
    m.b = std::max(m.b, beta_acc[k]);
  }
  m.lhs = sup_y + d.dZ + d.dU;
  m.delta = e_dxi2 + 2.0 * cross;
  m.bound = stability_bound(m.a, m.b, m.delta, pair.f2.coeffs.rho);
  return m;
}

// ---------------------------------------------------------------------------
// Convergence.

double empirical_order(const std::vector<int>& steps, const std::vector<double>& errors) {
  if (steps.size() != errors.size() || steps.size() < 2) throw std::invalid_argument("need >= 2 (N, error) pairs");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(steps.size());
  for (std::size_t k = 0; k < steps.size(); ++k) {
    if (!(errors[k] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double x = std::log(static_cast<double>(steps[k]));
    const double y = -std::log(errors[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

OracleGap mc_oracle_gap(const Instance& inst, const McCheck& mc, const ExperimentOptions& opts) {
  const TimeGrid grid(inst.grid.horizon(), mc.steps);
  const ScenarioTree tree = ScenarioTree::build(inst.model, grid, opts.node_cap);
  OracleGap gap;
  gap.tree_y0 = solve_backward(tree, inst.g, inst.xi, opts.fixed_point).Y[0][0];
  McOptions o;
  o.paths = mc.paths;
  o.bootstrap = mc.bootstrap;
  o.seed = mc.seed;
  o.basis = inst.basis;
  o.law = IncrementLaw::Lattice;
  o.fixed_point = opts.fixed_point;
  const McSolution sol = solve_mc(inst.model, grid, inst.g, inst.xi, o);
  gap.mc_y0 = sol.y0;
  gap.se = sol.y0_bootstrap_se;
  // both solvers stop their fixed points at tol, so deterministic instances differ by round-off
  gap.floor = 2.0 * (mc.steps + 1) * opts.fixed_point.tol * std::max(1.0, std::abs(gap.tree_y0));
  gap.within = std::abs(gap.mc_y0 - gap.tree_y0) <= 3.0 * gap.se + gap.floor;
  return gap;
}

Report run_convergence(const Instance& inst, const std::vector<int>& steps_list, std::optional<double> reference,
                       std::optional<double> expected_order, std::optional<McCheck> mc,
                       const ExperimentOptions& opts) {
  Stopwatch sw;
  Report report("convergence");
  json cj = case_header(inst.label, inst.model, inst.grid);
  cj["generator"] = inst.g.name;
  cj["terminal"] = inst.xi.name;
  try {
    std::vector<double> y0;
    json rows = json::array();
    for (int n : steps_list) {
      const ScenarioTree tree = ScenarioTree::build(inst.model, TimeGrid(inst.grid.horizon(), n), opts.node_cap);
      y0.push_back(solve_backward(tree, inst.g, inst.xi, opts.fixed_point).Y[0][0]);
      json row{{"steps", n}, {"Y0", y0.back()}};
      if (reference) row["error"] = std::abs(y0.back() - *reference);
      rows.push_back(row);
    }
    cj["sequence"] = rows;
    if (steps_list.size() >= 2) {
      std::vector<double> gaps;
      std::vector<int> gap_steps;
      for (std::size_t k = 0; k + 1 < y0.size(); ++k) {
        gaps.push_back(std::abs(y0[k] - y0[k + 1]));
        gap_steps.push_back(steps_list[k]);
      }
      cj["successive_gaps"] = gaps;
      if (gaps.size() >= 2) {
        const double order = empirical_order(gap_steps, gaps);
        cj["gap_order"] = std::isfinite(order) ? json(order) : json(nullptr);
      }
      if (std::all_of(gaps.begin(), gaps.end(), [](double g) { return g == 0.0; })) cj["gaps_identically_zero"] = true;
    }
    if (reference && steps_list.size() >= 2) {
      std::vector<double> errors;
      for (double v : y0) errors.push_back(std::abs(v - *reference));
      const double order = empirical_order(steps_list, errors);
      cj["reference"] = *reference;
      cj["error_order"] = std::isfinite(order) ? json(order) : json(nullptr);
      if (expected_order) {
        for (std::size_t k = 1; k < errors.size(); ++k)
          report.check(cj, "error(N=" + std::to_string(steps_list[k]) + ") < error(N=" + std::to_string(steps_list[k - 1]) + ")",
                       errors[k], "<", errors[k - 1], errors[k] < errors[k - 1]);
        const double dev = std::isfinite(order) ? std::abs(order - *expected_order) : 1e300;
        report.check(cj, "|order - expected|", dev, "<=", 0.3, dev <= 0.3);
      }
    }
    if (mc) {
      const OracleGap gap = mc_oracle_gap(inst, *mc, opts);
      cj["mc"] = {{"steps", mc->steps}, {"paths", mc->paths}, {"bootstrap", mc->bootstrap}, {"seed", mc->seed},
                  {"tree_Y0", gap.tree_y0}, {"mc_Y0", gap.mc_y0}, {"bootstrap_se", gap.se}, {"solver_floor", gap.floor}};
      report.check(cj, "|Y0_mc - Y0_tree|", std::abs(gap.mc_y0 - gap.tree_y0), "<=", 3.0 * gap.se + gap.floor, gap.within);
    }
  } catch (const std::exception& e) {
    cj["error"] = e.what();
    report.check(cj, "solved", 0.0, "==", 1.0, false);
  }
  report.add(std::move(cj));
  report.seconds = sw.seconds();
  return report;
}

std::vector<Instance> default_mc_oracle_suite() {
  const auto mA = model_brownian_one_mark();
  const auto mB = model_brownian_two_marks();
  const auto mC = model_pure_jump();
  GeneratorParams k1;
  k1.k = 1.0;
  GeneratorParams kneg;
  kneg.k = -1.0;
  auto inst = [](std::string label, LevyModel m, int steps, GeneratorSpec g, TerminalFunctional xi) {
    return Instance{std::move(label), std::move(m), TimeGrid(1.0, steps), std::move(g), std::move(xi), {}};
  };
  std::vector<Instance> s;
  s.push_back(inst("zero, W_T", LevyModel(0.0, 1.0, {}), 10, make_generator("zero"), make_terminal("W_T")));
  s.push_back(inst("linear_y, one", LevyModel(0.0, 0.0, {}), 10, make_generator("linear_y", k1), make_terminal("one")));
  s.push_back(inst("linear driver, X_T", mA, 8, make_generator("linear", linear_params(0.5, 0.3, {0.5})),
                   make_terminal("X_T")));
  s.push_back(inst("intro example, X_T", mA, 8, make_generator("intro_example"), make_terminal("X_T")));
  s.push_back(inst("violator, X_T", LevyModel(0.0, 0.0, {{0.5, 1.0}}), 10, make_generator("a_gamma_violator"),
                   make_terminal("X_T")));
  s.push_back(inst("boundary, X_T", mC, 6, make_generator("a_gamma_boundary"), make_terminal("X_T")));
  s.push_back(inst("zero, X_T with a large mark", mB, 5, make_generator("zero"), make_terminal("X_T")));
  s.push_back(inst("linear_y decay, X_T", mA, 8, make_generator("linear_y", kneg), make_terminal("X_T")));
  return s;
}

}  // namespace jumpbsde
