#include "jumpbsde/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace jumpbsde {

using nlohmann::json;

namespace {

void allow_only(const json& j, const std::set<std::string>& keys, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!keys.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

double positive(const json& j, const std::string& key, double fallback) {
  const double v = get<double>(j, key, fallback);
  if (!(v > 0.0)) throw ConfigError("key '" + key + "' must be > 0");
  return v;
}

const std::set<std::string> kModelKeys{"drift", "sigma", "marks", "T", "steps"};

bool has_model(const json& j) {
  return j.contains("drift") || j.contains("sigma") || j.contains("marks");
}

/// Top-level model/grid keys overridden by those present in `local`.
json merged_model(const json& top, const json& local) {
  json m = json::object();
  for (const auto& k : kModelKeys) {
    if (local.contains(k))
      m[k] = local[k];
    else if (top.contains(k))
      m[k] = top[k];
  }
  return m;
}

IncrementLaw parse_law(const std::string& s) {
  if (s == "lattice") return IncrementLaw::Lattice;
  if (s == "continuous") return IncrementLaw::Continuous;
  throw ConfigError("law must be 'lattice' or 'continuous'");
}

}  // namespace

LevyModel parse_model(const json& j) {
  std::vector<Mark> marks;
  if (j.contains("marks")) {
    if (!j["marks"].is_array()) throw ConfigError("marks must be an array of {x, lambda}");
    for (const auto& m : j["marks"]) {
      allow_only(m, {"x", "lambda"}, "mark");
      if (!m.contains("x") || !m.contains("lambda")) throw ConfigError("every mark needs x and lambda");
      marks.push_back({m["x"].get<double>(), m["lambda"].get<double>()});
    }
  }
  try {
    return LevyModel(get<double>(j, "drift", 0.0), get<double>(j, "sigma", 0.0), std::move(marks));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

TimeGrid parse_grid(const json& j) {
  if (!j.contains("steps")) throw ConfigError("missing key 'steps'");
  try {
    return TimeGrid(get<double>(j, "T", 1.0), get<int>(j, "steps", 1));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
}

GeneratorSpec parse_generator(const json& j) {
  try {
    if (j.is_string()) return make_generator(j.get<std::string>());
    if (!j.is_object() || !j.contains("name")) throw ConfigError("generator must be a name or {name, ...}");
    allow_only(j, {"name", "k", "a", "b", "c", "offset", "truncate"}, "generator");
    GeneratorParams p;
    p.k = get<double>(j, "k", p.k);
    p.a = get<double>(j, "a", p.a);
    p.b = get<double>(j, "b", p.b);
    p.offset = get<double>(j, "offset", p.offset);
    if (j.contains("c")) {
      if (j["c"].is_number())
        p.c = {j["c"].get<double>()};
      else
        p.c = get<std::vector<double>>(j, "c", {});
    }
    GeneratorSpec g = make_generator(j["name"].get<std::string>(), p);
    if (j.contains("truncate")) g = truncate_generator(g, get<int>(j, "truncate", 1));
    return g;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

TerminalFunctional parse_terminal(const json& j) {
  try {
    if (j.is_string()) return make_terminal(j.get<std::string>());
    if (j.is_array()) {
      std::vector<TerminalFunctional> terms;
      for (const auto& t : j) terms.push_back(parse_terminal(t));
      if (terms.empty()) throw ConfigError("terminal sum needs at least one term");
      return sum(std::move(terms));
    }
    if (!j.is_object() || !j.contains("name")) throw ConfigError("terminal must be a name, {name, ...} or an array");
    allow_only(j, {"name", "value", "strike", "cap", "marks", "min_count", "scale"}, "terminal");
    TerminalParams p;
    p.value = get<double>(j, "value", p.value);
    p.strike = get<double>(j, "strike", p.strike);
    p.cap = get<double>(j, "cap", p.cap);
    p.marks = get<std::vector<std::size_t>>(j, "marks", p.marks);
    p.min_count = get<int>(j, "min_count", p.min_count);
    p.scale = get<double>(j, "scale", p.scale);
    return make_terminal(j["name"].get<std::string>(), p);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

Instance ExperimentConfig::instance(const std::string& label) const {
  if (!model) throw ConfigError("config needs a model (drift, sigma, marks)");
  if (!grid) throw ConfigError("config needs a grid (T, steps)");
  if (!generator) throw ConfigError("config needs a generator");
  if (!terminal) throw ConfigError("config needs a terminal");
  return Instance{label, *model, *grid, *generator, *terminal, mc.basis};
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  allow_only(j,
             {"experiment", "description", "drift", "sigma", "marks", "T", "steps", "generator", "generator2",
              "terminal", "terminal2", "solver", "paths", "basis_degree", "basis_features", "bootstrap", "law",
              "scheme", "keep_paths", "truncation_levels", "truncation_tolerance", "tolerance", "max_iterations",
              "comparison_tolerance", "seed", "steps_list", "reference", "expected_order", "pairs", "instances",
              "counterexample", "mc", "node_cap", "sampler_samples", "sampler_seed", "reference_rel_tol",
              "c", "K", "rho", "t"},
             "config");
  ExperimentConfig c;
  c.raw = j;
  c.experiment = get<std::string>(j, "experiment", "");

  if (has_model(j)) c.model = parse_model(j);
  if (j.contains("steps")) c.grid = parse_grid(j);
  if (j.contains("generator")) c.generator = parse_generator(j["generator"]);
  if (j.contains("generator2")) c.generator2 = parse_generator(j["generator2"]);
  if (j.contains("terminal")) c.terminal = parse_terminal(j["terminal"]);
  if (j.contains("terminal2")) c.terminal2 = parse_terminal(j["terminal2"]);

  c.solver = get<std::string>(j, "solver", c.solver);
  if (c.solver != "lattice" && c.solver != "mc") throw ConfigError("solver must be 'lattice' or 'mc'");
  c.seed = get<std::uint64_t>(j, "seed", c.seed);

  c.options.fixed_point.tol = positive(j, "tolerance", c.options.fixed_point.tol);
  c.options.fixed_point.max_iterations = get<int>(j, "max_iterations", c.options.fixed_point.max_iterations);
  if (c.options.fixed_point.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  c.options.comparison_tol = positive(j, "comparison_tolerance", 10.0 * c.options.fixed_point.tol);
  c.options.node_cap = get<std::size_t>(j, "node_cap", c.options.node_cap);
  c.options.sampler.samples = get<std::size_t>(j, "sampler_samples", c.options.sampler.samples);
  c.options.sampler.seed = get<std::uint64_t>(j, "sampler_seed", c.options.sampler.seed);

  c.mc.paths = get<std::size_t>(j, "paths", c.mc.paths);
  c.mc.basis.degree = get<int>(j, "basis_degree", c.mc.basis.degree);
  c.mc.basis.features = get<std::vector<std::string>>(j, "basis_features", c.mc.basis.features);
  c.mc.bootstrap = get<std::size_t>(j, "bootstrap", c.mc.bootstrap);
  c.mc.seed = c.seed;
  c.mc.law = parse_law(get<std::string>(j, "law", "continuous"));
  const std::string scheme = get<std::string>(j, "scheme", "implicit");
  if (scheme != "implicit" && scheme != "explicit") throw ConfigError("scheme must be 'implicit' or 'explicit'");
  c.mc.scheme = scheme == "implicit" ? McScheme::Implicit : McScheme::Explicit;
  c.mc.keep_paths = get<bool>(j, "keep_paths", false);
  c.mc.fixed_point = c.options.fixed_point;

  c.truncation_levels = get<std::vector<int>>(j, "truncation_levels", {});
  for (int n : c.truncation_levels)
    if (n < 1) throw ConfigError("truncation levels must be >= 1");
  c.truncation_tolerance = positive(j, "truncation_tolerance", c.truncation_tolerance);
  c.steps_list = get<std::vector<int>>(j, "steps_list", {});
  for (int n : c.steps_list)
    if (n < 1) throw ConfigError("steps_list entries must be >= 1");
  if (j.contains("reference")) c.reference = get<double>(j, "reference", 0.0);
  if (j.contains("expected_order")) c.expected_order = get<double>(j, "expected_order", 1.0);

  if (j.contains("mc")) {
    const json& m = j["mc"];
    allow_only(m, {"paths", "bootstrap", "seed", "steps"}, "mc");
    McCheck mc;
    mc.paths = get<std::size_t>(m, "paths", mc.paths);
    mc.bootstrap = get<std::size_t>(m, "bootstrap", mc.bootstrap);
    mc.seed = get<std::uint64_t>(m, "seed", c.seed);
    mc.steps = get<int>(m, "steps", c.grid ? c.grid->steps() : mc.steps);
    c.mc_check = mc;
  }

  if (j.contains("pairs")) {
    const json& p = j["pairs"];
    if (p.is_string()) {
      if (p.get<std::string>() != "default") throw ConfigError("pairs must be 'default' or an array");
      c.pairs = default_comparison_suite();
    } else {
      for (const auto& e : p) {
        allow_only(e, {"label", "generator", "generator2", "terminal", "terminal2", "drift", "sigma", "marks", "T",
                       "steps"},
                   "pair");
        const json m = merged_model(j, e);
        if (!e.contains("generator") || !e.contains("terminal"))
          throw ConfigError("every pair needs generator and terminal");
        ComparisonCase cc{get<std::string>(e, "label", "pair " + std::to_string(c.pairs.size() + 1)),
                          parse_model(m),
                          parse_grid(m),
                          parse_generator(e["generator"]),
                          parse_generator(e.contains("generator2") ? e["generator2"] : e["generator"]),
                          parse_terminal(e["terminal"]),
                          parse_terminal(e.contains("terminal2") ? e["terminal2"] : e["terminal"])};
        c.pairs.push_back(std::move(cc));
      }
    }
  } else if (c.generator && c.terminal && c.model && c.grid) {
    c.pairs.push_back(ComparisonCase{"configured pair", *c.model, *c.grid, *c.generator,
                                     c.generator2 ? *c.generator2 : *c.generator, *c.terminal,
                                     c.terminal2 ? *c.terminal2 : *c.terminal});
  }

  if (j.contains("instances")) {
    const json& p = j["instances"];
    if (p.is_string()) {
      const auto name = p.get<std::string>();
      if (name == "default")
        c.instances = default_apriori_suite();
      else if (name == "mc_default")
        c.instances = default_mc_oracle_suite();
      else
        throw ConfigError("instances must be 'default', 'mc_default' or an array");
    } else {
      for (const auto& e : p) {
        allow_only(e, {"label", "generator", "terminal", "basis_features", "drift", "sigma", "marks", "T", "steps"},
                   "instance");
        const json m = merged_model(j, e);
        if (!e.contains("generator") || !e.contains("terminal"))
          throw ConfigError("every instance needs generator and terminal");
        Instance in{get<std::string>(e, "label", "instance " + std::to_string(c.instances.size() + 1)),
                    parse_model(m),
                    parse_grid(m),
                    parse_generator(e["generator"]),
                    parse_terminal(e["terminal"]),
                    c.mc.basis};
        in.basis.features = get<std::vector<std::string>>(e, "basis_features", in.basis.features);
        c.instances.push_back(std::move(in));
      }
    }
  }

  if (j.contains("counterexample")) {
    const json& p = j["counterexample"];
    if (p.is_string()) {
      const auto name = p.get<std::string>();
      if (name == "search")
        c.search_counterexample = true;
      else if (name == "default")
        c.counterexample = default_counterexample();
      else
        throw ConfigError("counterexample must be 'default', 'search' or an object");
    } else {
      allow_only(p, {"lambda", "steps", "min_count", "T", "x"}, "counterexample");
      CounterexampleInstance inst;
      inst.lambda = positive(p, "lambda", inst.lambda);
      inst.steps = get<int>(p, "steps", inst.steps);
      inst.min_count = get<int>(p, "min_count", inst.min_count);
      inst.horizon = positive(p, "T", inst.horizon);
      inst.size = get<double>(p, "x", inst.size);
      c.counterexample = inst;
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace jumpbsde
