// Experiment runner: one subcommand per experiment, CSV tables plus report.json in --out.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "jumpbsde/config.hpp"
#include "jumpbsde/experiments.hpp"

namespace fs = std::filesystem;
using namespace jumpbsde;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string out;
};

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream f(dir / name);
  if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
  f.precision(17);
  return f;
}

int finish(const Report& report, const fs::path& dir) {
  auto f = open_out(dir, "report.json");
  f << report.to_json().dump(2) << '\n';
  std::cout << report.experiment << ": " << report.verdicts - report.failures << "/" << report.verdicts
            << " verdicts passed";
  if (report.preconditions_unmet > 0) std::cout << ", " << report.preconditions_unmet << " case(s) preconditions-unmet";
  std::cout << " -> " << (dir / "report.json").string() << '\n';
  return report.passed() ? 0 : 1;
}

std::string cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    std::string s = v.get<std::string>();
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  }
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  return v.dump();
}

/// CSV with the given columns, one row per JSON object.
void write_table(const fs::path& dir, const std::string& name, const std::vector<std::string>& cols,
                 const std::vector<json>& rows) {
  auto f = open_out(dir, name);
  for (std::size_t c = 0; c < cols.size(); ++c) f << (c ? "," : "") << cols[c];
  f << '\n';
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < cols.size(); ++c) f << (c ? "," : "") << (r.contains(cols[c]) ? cell(r[cols[c]]) : "");
    f << '\n';
  }
}

// ---------------------------------------------------------------------------

int cmd_simulate(const ExperimentConfig& cfg, const fs::path& out) {
  if (!cfg.model || !cfg.grid) throw ConfigError("simulate needs a model and a grid");
  const auto start = std::chrono::steady_clock::now();
  const PathBundle b = simulate_paths(*cfg.model, *cfg.grid, cfg.mc.paths, cfg.seed, cfg.mc.law);
  {
    auto f = open_out(out, "paths.csv");
    b.write_csv(f);
  }
  Report r("simulate");
  const double P = static_cast<double>(b.paths());
  json c{{"label", "path statistics"}, {"paths", b.paths()}, {"seed", cfg.seed}};
  // X_T mean against a T + T sum_{|x|>1} lambda x
  double m = 0.0, m2 = 0.0;
  for (std::size_t p = 0; p < b.paths(); ++p) {
    const double x = b.terminal_x(p);
    m += x;
    m2 += x * x;
  }
  m /= P;
  const double se = std::sqrt(std::max(m2 / P - m * m, 0.0) / P);
  const double expect = cfg.model->mean(cfg.grid->horizon());
  c["mean_X_T"] = m;
  c["se_X_T"] = se;
  r.check(c, "|mean X_T - E X_T|", std::abs(m - expect), "<=", 4.0 * se + 1e-12, std::abs(m - expect) <= 4.0 * se + 1e-12);
  for (std::size_t j = 0; j < b.marks(); ++j) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < b.paths(); ++p) {
      double tot = 0.0;
      for (int i = 0; i < b.steps(); ++i) tot += b.compensated(p, i, j);
      s += tot;
      s2 += tot * tot;
    }
    s /= P;
    const double sej = std::sqrt(std::max(s2 / P - s * s, 0.0) / P);
    r.check(c, "|mean compensated count, mark " + std::to_string(j + 1) + "|", std::abs(s), "<=", 4.0 * sej + 1e-12,
            std::abs(s) <= 4.0 * sej + 1e-12);
  }
  r.add(c);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(r, out);
}

int cmd_solve_lattice(const ExperimentConfig& cfg, const fs::path& out) {
  const Instance inst = cfg.instance("configured instance");
  const auto start = std::chrono::steady_clock::now();
  const ScenarioTree tree = ScenarioTree::build(inst.model, inst.grid, cfg.options.node_cap);
  const SolutionGrid sol = solve_backward(tree, inst.g, inst.xi, cfg.options.fixed_point);
  {
    auto f = open_out(out, "solution.csv");
    sol.write_csv(f);
  }
  Report r("solve-lattice");
  json c{{"label", inst.label}, {"generator", inst.g.name}, {"terminal", inst.xi.name}, {"nodes", tree.total_nodes()},
         {"Y0", sol.Y[0][0]}, {"max_fixed_point_iterations", sol.max_iterations_used},
         {"martingale_defect", martingale_defect(tree, sol)},
         {"representation_residual", representation_residual(tree, sol)}};
  double ymax = 0.0;
  for (const auto& level : sol.Y)
    for (double v : level) ymax = std::max(ymax, std::abs(v));
  const double tol = 10.0 * std::max(cfg.options.fixed_point.tol, 4.0 * std::numeric_limits<double>::epsilon() * ymax);
  const double res = scheme_residual(tree, inst.g, sol);
  r.check(c, "one-step scheme residual", res, "<=", tol, res <= tol);
  r.add(c);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(r, out);
}

int cmd_solve_mc(const ExperimentConfig& cfg, const fs::path& out) {
  const Instance inst = cfg.instance("configured instance");
  const auto start = std::chrono::steady_clock::now();
  McOptions o = cfg.mc;
  o.basis = inst.basis;
  const McSolution sol = solve_mc(inst.model, inst.grid, inst.g, inst.xi, o);
  {
    auto f = open_out(out, "mc_summary.csv");
    sol.write_csv(f);
  }
  Report r("solve-mc");
  json degrees = json::array();
  for (int i = 0; i < sol.steps; ++i) degrees.push_back(sol.summary[i].degree);
  json c{{"label", inst.label},  {"generator", inst.g.name},          {"terminal", inst.xi.name},
         {"paths", sol.paths},   {"Y0", sol.y0},                      {"bootstrap_se", sol.y0_bootstrap_se},
         {"degrees", degrees},   {"degree_reduced", sol.degree_reduced}};
  if (cfg.reference) {
    const double rel = cfg.raw.value("reference_rel_tol", 0.0);
    const double gap = std::abs(sol.y0 - *cfg.reference);
    const double rhs = 3.0 * sol.y0_bootstrap_se + rel * std::abs(*cfg.reference) + 1e-12;
    c["reference"] = *cfg.reference;
    r.check(c, "|Y0 - reference|", gap, "<=", rhs, gap <= rhs);
  }
  r.add(c);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(r, out);
}

int cmd_compare(const ExperimentConfig& cfg, const fs::path& out) {
  if (cfg.pairs.empty()) throw ConfigError("compare needs 'pairs' or a generator/terminal pair");
  const auto start = std::chrono::steady_clock::now();
  Report r = run_comparison(cfg.pairs, cfg.options);
  if (!cfg.steps_list.empty())
    for (const auto& p : cfg.pairs) add_refinement(r, p, cfg.steps_list, cfg.options);
  std::vector<json> rows;
  for (const auto& c : r.cases) {
    json row{{"label", c["label"]}, {"status", c.value("status", c.contains("checks") ? "checked" : "error")}};
    if (c.contains("Y0")) row["Y0"] = c["Y0"];
    if (c.contains("Y2_0")) row["Y2_0"] = c["Y2_0"];
    if (c.contains("argmax")) row["max_Y_minus_Y2"] = c["argmax"]["max_Y_minus_Y2"];
    rows.push_back(row);
    if (c.contains("refinement"))
      for (const auto& rr : c["refinement"]) {
        json row2{{"label", c["label"]}, {"status", "refinement"}, {"steps", rr["steps"]},
                  {"max_Y_minus_Y2", rr["max_Y_minus_Y2"]}};
        rows.push_back(row2);
      }
  }
  write_table(out, "compare.csv", {"label", "status", "steps", "Y0", "Y2_0", "max_Y_minus_Y2"}, rows);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(r, out);
}

int cmd_counterexample(const ExperimentConfig& cfg, const fs::path& out) {
  const auto start = std::chrono::steady_clock::now();
  CounterexampleInstance inst = cfg.counterexample.value_or(default_counterexample());
  json search_info;
  if (cfg.search_counterexample) {
    const CounterexampleSearch s = search_counterexample(cfg.options);
    inst = s.best;
    search_info = {{"candidates", s.candidates}, {"violating", s.violating}, {"best_margin", s.best_margin}};
  }
  Report r = run_counterexample(inst, cfg.options);
  if (!search_info.is_null()) r.info["search"] = search_info;
  std::vector<json> rows;
  for (const auto& c : r.cases) {
    const json& w = c.contains("witness") ? c["witness"] : c["argmax"];
    rows.push_back({{"label", c["label"]}, {"max_Y_minus_Y2", w["max_Y_minus_Y2"]}, {"level", w["level"]},
                    {"node", w["node"]}, {"Y", w["Y"]}, {"Y2", w["Y2"]}});
  }
  write_table(out, "counterexample.csv", {"label", "max_Y_minus_Y2", "level", "node", "Y", "Y2"}, rows);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(r, out);
}

int cmd_truncate(const ExperimentConfig& cfg, const fs::path& out) {
  if (cfg.truncation_levels.empty()) throw ConfigError("truncate-study needs truncation_levels");
  Report r = run_truncation_study(cfg.instance("truncation study"), cfg.truncation_levels, cfg.truncation_tolerance,
                                  cfg.options);
  std::vector<json> rows;
  for (const auto& c : r.cases)
    if (c.contains("distances"))
      for (const auto& d : c["distances"]) rows.push_back(d);
  write_table(out, "truncation.csv", {"n", "marks_removed", "dY", "dZ", "dU", "Y0"}, rows);
  return finish(r, out);
}

int cmd_apriori(const ExperimentConfig& cfg, const fs::path& out) {
  std::vector<Instance> instances = cfg.instances;
  if (instances.empty()) instances.push_back(cfg.instance("configured instance"));
  Report r = run_apriori_check(instances, cfg.options);
  std::vector<json> rows;
  for (const auto& c : r.cases) {
    json row{{"label", c["label"]}};
    if (c.contains("checks") && c["checks"].size() == 2) {
      row["E_sup_Y2"] = c["checks"][0]["lhs"];
      row["sup_Y_bound"] = c["checks"][0]["rhs"];
      row["ZU"] = c["checks"][1]["lhs"];
      row["ZU_bound"] = c["checks"][1]["rhs"];
      row["C_K"] = c["measured"]["C_K"];
    }
    rows.push_back(row);
  }
  write_table(out, "apriori.csv", {"label", "C_K", "E_sup_Y2", "sup_Y_bound", "ZU", "ZU_bound"}, rows);
  return finish(r, out);
}

int cmd_convergence(const ExperimentConfig& cfg, const fs::path& out) {
  if (cfg.steps_list.empty()) throw ConfigError("convergence needs steps_list");
  Report r = run_convergence(cfg.instance("convergence"), cfg.steps_list, cfg.reference, cfg.expected_order,
                             cfg.mc_check, cfg.options);
  std::vector<json> rows;
  for (const auto& c : r.cases)
    if (c.contains("sequence"))
      for (const auto& s : c["sequence"]) rows.push_back(s);
  write_table(out, "convergence.csv", {"steps", "Y0", "error"}, rows);
  return finish(r, out);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  return v;
}

struct BihariArgs {
  std::optional<double> c, t, T;
  std::string breaks, values, rho;
};

int cmd_bihari(const json& raw, const BihariArgs& a, const fs::path& out) {
  const auto start = std::chrono::steady_clock::now();
  const double c = a.c.value_or(raw.value("c", 1.0));
  const double t = a.t.value_or(raw.value("t", 0.0));
  const double T = a.T.value_or(raw.value("T", 1.0));
  const std::string rho_name = !a.rho.empty() ? a.rho : raw.value("rho", std::string("id"));
  std::vector<double> breaks, values;
  if (!a.breaks.empty() || !a.values.empty()) {
    breaks = parse_list(a.breaks);
    values = parse_list(a.values);
  } else if (raw.contains("K")) {
    breaks = raw["K"].at("breaks").get<std::vector<double>>();
    values = raw["K"].at("values").get<std::vector<double>>();
  } else {
    breaks = {t, T};
    values = {1.0};
  }
  const PiecewiseConstantRate K(breaks, values);
  const RhoFunction rho = RhoFunction::by_name(rho_name);
  const BihariResult res = bihari_bound(c, K, rho, t, T);
  Report r("bihari");
  json cj{{"label", "bihari bound"}, {"c", c},   {"t", t},   {"T", T}, {"rho", rho_name},
          {"breaks", breaks},        {"values", values},     {"in_domain", res.in_domain},
          {"G_of_c", res.G_of_c},    {"integral_K", res.integral_K}};
  cj["bound"] = res.in_domain ? json(res.bound) : json("out-of-domain");
  r.add(cj);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (res.in_domain) {
    std::cout.precision(17);
    std::cout << "bound = " << res.bound << '\n';
  } else {
    std::cout << "bound = out-of-domain\n";
  }
  write_table(out, "bihari.csv", {"c", "t", "T", "rho", "integral_K", "G_of_c", "bound"}, {cj});
  return finish(r, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BSDEs with jumps: exact scenario trees, Monte-Carlo regression and bound engines"};
  app.require_subcommand(1);

  Common common;
  BihariArgs bargs;
  struct Sub {
    std::string name;
    std::string help;
    int (*run)(const ExperimentConfig&, const fs::path&);
  };
  const std::vector<Sub> subs{
      {"simulate", "simulate paths of the Levy model (paths.csv)", cmd_simulate},
      {"solve-lattice", "exact backward solve on the scenario tree (solution.csv)", cmd_solve_lattice},
      {"solve-mc", "least-squares Monte-Carlo backward solve (mc_summary.csv)", cmd_solve_mc},
      {"compare", "comparison suite Y <= Y' on the tree (compare.csv)", cmd_compare},
      {"counterexample", "comparison failure without (A gamma) (counterexample.csv)", cmd_counterexample},
      {"truncate-study", "distances of jump-truncated solutions (truncation.csv)", cmd_truncate},
      {"apriori", "tree norms against the explicit a-priori bounds (apriori.csv)", cmd_apriori},
      {"convergence", "dt refinement and MC-vs-tree gaps (convergence.csv)", cmd_convergence},
  };
  std::vector<CLI::App*> handles;
  for (const auto& s : subs) {
    CLI::App* sc = app.add_subcommand(s.name, s.help);
    sc->add_option("--config", common.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sc->add_option("--out", common.out, "output directory")->required();
    handles.push_back(sc);
  }
  CLI::App* bihari = app.add_subcommand("bihari", "backward Bihari-LaSalle bound G^-1(G(c) + int_t^T K)");
  bihari->add_option("--config", common.config, "optional JSON with c, K {breaks, values}, rho, t, T")
      ->check(CLI::ExistingFile);
  bihari->add_option("--out", common.out, "output directory")->required();
  bihari->add_option("--c", bargs.c, "c > 0");
  bihari->add_option("--breaks", bargs.breaks, "comma-separated breakpoints of K");
  bihari->add_option("--values", bargs.values, "comma-separated values of K");
  bihari->add_option("--rho", bargs.rho, "id | sqrt | one_minus_power");
  bihari->add_option("--t", bargs.t, "lower time");
  bihari->add_option("--T", bargs.T, "horizon");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out(common.out);
    fs::create_directories(out);
    if (bihari->parsed()) {
      json raw = json::object();
      if (!common.config.empty()) raw = load_config(common.config).raw;
      return cmd_bihari(raw, bargs, out);
    }
    for (std::size_t k = 0; k < subs.size(); ++k)
      if (handles[k]->parsed()) return subs[k].run(load_config(common.config), out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
