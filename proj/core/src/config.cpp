#include "agbp/config.hpp"

#include <fstream>
#include <set>

#include "agbp/error.hpp"

namespace agbp {

using nlohmann::json;

namespace {

// Typed access to one JSON object; finish() rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return as<T>(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ValidationError("config: " + (key.empty() ? (where_.empty() ? "<root>" : where_) : path(key)) +
                          ": " + what);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

 private:
  template <class T>
  T as(const std::string& key) {
    const json& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
          fail(key, "expected a non-negative integer");
        }
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) fail(key, "expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) fail(key, "expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(key, "expected a string");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class F>
auto rethrow_as(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    if (msg.rfind("config:", 0) == 0) throw;
    throw ValidationError("config: " + where + ": " + msg);
  }
}

std::vector<std::size_t> index_list(Section& s, const std::string& key) {
  std::vector<std::size_t> out;
  const json& v = s.raw(key);
  if (!v.is_array()) s.fail(key, "expected an array of non-negative integers");
  for (const json& x : v) {
    if (!x.is_number_integer() || x.get<std::int64_t>() < 0) {
      s.fail(key, "expected an array of non-negative integers");
    }
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

GeneratorSpec parse_generator(const json& j) {
  Section s(j, "generator");
  GeneratorSpec g;
  g.cluster_count = s.get<std::size_t>("cluster_count", g.cluster_count);
  g.rows_per_cluster = s.get<std::size_t>("rows_per_cluster", g.rows_per_cluster);
  g.cols_per_cluster = s.get<std::size_t>("cols_per_cluster", g.rows_per_cluster);
  g.expected_internal_edges = s.get<double>("expected_internal_edges", g.expected_internal_edges);
  g.expected_tie_edges = s.get<double>("expected_tie_edges", g.expected_tie_edges);
  if (s.has("kind")) {
    g.kind = rethrow_as(s.path("kind"), [&] { return matrix_kind_from_string(s.get<std::string>("kind", "")); });
  }
  g.diagonal_increment = s.get<double>("diagonal_increment", g.diagonal_increment);
  if (s.has("variance")) {
    const json& v = s.raw("variance");
    if (v.is_number()) {
      g.variances = VarianceScheme::uniform(v.get<double>());
    } else {
      Section vs(v, "generator.variance");
      g.variances.independent = vs.get<double>("independent", g.variances.independent);
      g.variances.dependent = vs.get<double>("dependent", g.variances.dependent);
      vs.finish();
    }
  }
  g.seed = s.get<std::uint64_t>("seed", g.seed);
  s.finish();
  rethrow_as("generator", [&] { g.validate(); return 0; });
  return g;
}

json to_json(const GeneratorSpec& spec) {
  return {{"cluster_count", spec.cluster_count},
          {"rows_per_cluster", spec.rows_per_cluster},
          {"cols_per_cluster", spec.cols_per_cluster},
          {"expected_internal_edges", spec.expected_internal_edges},
          {"expected_tie_edges", spec.expected_tie_edges},
          {"kind", to_string(spec.kind)},
          {"diagonal_increment", spec.diagonal_increment},
          {"variance", {{"independent", spec.variances.independent}, {"dependent", spec.variances.dependent}}},
          {"seed", spec.seed}};
}

DampingConfig parse_damping(const json& j) {
  Section s(j, "damping");
  DampingConfig d;
  d.weight = s.get<double>("weight", d.weight);
  d.probability = s.get<double>("probability", d.probability);
  d.seed = s.get<std::uint64_t>("seed", d.seed);
  const std::string mask = s.get<std::string>("mask", "fixed");
  if (mask == "fixed") {
    d.mode = MaskMode::fixed;
  } else if (mask == "per-iteration") {
    d.mode = MaskMode::per_iteration;
  } else {
    s.fail("mask", "expected 'fixed' or 'per-iteration'");
  }
  const std::string scope = s.get<std::string>("scope", "all");
  if (scope == "all") {
    d.scope = DampingScope::all;
  } else if (scope == "global-only") {
    d.scope = DampingScope::global_only;
  } else if (scope == "local-only") {
    d.scope = DampingScope::local_only;
  } else {
    s.fail("scope", "expected 'all', 'global-only' or 'local-only'");
  }
  s.finish();
  rethrow_as("damping", [&] { d.validate(); return 0; });
  return d;
}

namespace {

SequenceOrder parse_order(Section& s, const std::string& key) {
  const std::string order = s.get<std::string>(key, "global-first");
  if (order == "global-first") return SequenceOrder::global_first;
  if (order == "local-first") return SequenceOrder::local_first;
  s.fail(key, "expected 'global-first' or 'local-first'");
}

}  // namespace

Schedule parse_schedule(const json& j) {
  Section s(j, "schedule");
  Schedule sc = Schedule::alternating(1, 30);
  const std::string kind = s.get<std::string>("kind", "alternating");
  if (kind == "synchronous") {
    sc.kind = ScheduleKind::synchronous;
  } else if (kind != "alternating") {
    s.fail("kind", "expected 'synchronous' or 'alternating'");
  }
  sc.nu_g = s.get<std::size_t>("nu_g", sc.nu_g);
  sc.nu_l = s.get<std::size_t>("nu_l", sc.nu_l);
  sc.order = parse_order(s, "order");
  s.finish();
  rethrow_as("schedule", [&] { sc.validate(); return 0; });
  return sc;
}

RunSettings parse_run(const json& j) {
  Section s(j, "run");
  RunSettings r;
  r.run.tolerance = s.get<double>("tolerance", r.run.tolerance);
  r.run.max_iterations = s.get<std::size_t>("max_iterations", r.run.max_iterations);
  r.run.max_sequences = s.get<std::size_t>("max_sequences", r.run.max_sequences);
  r.run.prior_mean = s.get<double>("prior_mean", r.run.prior_mean);
  r.run.prior_variance = s.get<double>("prior_variance", r.run.prior_variance);
  const std::string mode = s.get<std::string>("convergence", "oracle");
  if (mode == "oracle") {
    r.mode = ConvergenceMode::oracle;
  } else if (mode == "residual") {
    r.mode = ConvergenceMode::residual;
  } else {
    s.fail("convergence", "expected 'oracle' or 'residual'");
  }
  s.finish();
  rethrow_as("run", [&] { r.run.validate(); return 0; });
  if (!(r.run.prior_variance > 0.0)) s.fail("prior_variance", "must be positive");
  return r;
}

AgingModel AgingRule::model_for(double arrival, double variance) const {
  if (ceiling) return AgingModel::with_ceiling(kind, alpha, beta, variance, arrival, arrival + hold, *ceiling);
  const double after = saturate_after.value_or(hold);
  return AgingModel::with_saturation(kind, alpha, beta, variance, arrival, arrival + hold, arrival + after);
}

std::vector<AgingRule> parse_aging(const json& j) {
  if (!j.is_array()) throw ValidationError("config: dynamic.aging: expected an array");
  std::vector<AgingRule> rules;
  for (std::size_t k = 0; k < j.size(); ++k) {
    Section s(j[k], "dynamic.aging[" + std::to_string(k) + "]");
    AgingRule a;
    if (s.has("kind")) {
      a.kind = rethrow_as(s.path("kind"), [&] { return growth_kind_from_string(s.get<std::string>("kind", "")); });
    }
    a.alpha = s.get<double>("alpha", a.alpha);
    a.beta = s.get<double>("beta", a.beta);
    a.hold = s.get<double>("hold", a.hold);
    a.saturate_after = s.maybe<double>("saturate_after");
    a.ceiling = s.maybe<double>("ceiling");
    if (a.saturate_after && a.ceiling) s.fail("ceiling", "give either saturate_after or ceiling, not both");
    if (!a.saturate_after && !a.ceiling) s.fail("saturate_after", "one of saturate_after or ceiling is required");
    if (a.saturate_after && *a.saturate_after < a.hold) s.fail("saturate_after", "must be at least hold");
    a.probability = s.get<double>("probability", a.probability);
    if (!(a.probability >= 0.0 && a.probability <= 1.0)) s.fail("probability", "must lie in [0, 1]");
    if (s.has("factors")) {
      const json& f = s.raw("factors");
      if (f.is_string()) {
        if (f.get<std::string>() != "dependent") s.fail("factors", "expected 'dependent' or a list of ids");
        a.dependent_rows = true;
      } else {
        a.factors = index_list(s, "factors");
      }
    } else {
      s.fail("factors", "required");
    }
    s.finish();
    rethrow_as(s.path("kind"), [&] { a.model_for(0.0, 1.0); return 0; });
    rules.push_back(std::move(a));
  }
  return rules;
}

namespace {

ExperimentConfig parse_experiment(const json& j, const Config& outer) {
  Section s(j, "experiment");
  ExperimentConfig e;
  if (s.has("scenarios")) {
    const json& list = s.raw("scenarios");
    if (!list.is_array()) s.fail("scenarios", "expected an array");
    for (std::size_t k = 0; k < list.size(); ++k) {
      Section sc(list[k], "experiment.scenarios[" + std::to_string(k) + "]");
      Scenario scenario;
      scenario.name = sc.get<std::string>("name", "s" + std::to_string(k));
      if (!sc.has("generator")) sc.fail("generator", "required");
      scenario.spec = parse_generator(sc.raw("generator"));
      sc.finish();
      e.scenarios.push_back(std::move(scenario));
    }
  } else if (outer.generator) {
    e.scenarios.push_back({"baseline", *outer.generator});
  }
  if (s.has("nu_g")) e.nu_g_grid = index_list(s, "nu_g");
  if (s.has("nu_l")) e.nu_l_grid = index_list(s, "nu_l");
  e.order = parse_order(s, "order");
  e.damping = outer.damping;
  e.damp_synchronous = s.get<bool>("damp_synchronous", e.damp_synchronous);
  e.repetitions = s.get<std::size_t>("repetitions", e.repetitions);
  e.tolerance = s.get<double>("tolerance", outer.run.run.tolerance);
  e.max_iterations = s.get<std::size_t>("max_iterations", outer.run.run.max_iterations);
  e.max_sequences = s.get<std::size_t>("max_sequences", outer.run.run.max_sequences);
  e.prior_variance = outer.run.run.prior_variance;
  e.perturbation_probability = s.get<double>("perturbation_probability", e.perturbation_probability);
  e.base_seed = s.get<std::uint64_t>("base_seed", outer.seed.value_or(0));
  e.threads = s.get<std::size_t>("threads", e.threads);
  if (outer.output) e.output_dir = *outer.output;
  s.finish();
  rethrow_as("experiment", [&] { e.validate(); return 0; });
  return e;
}

DynamicSettings parse_dynamic(const json& j, const std::filesystem::path& base) {
  Section s(j, "dynamic");
  DynamicSettings d;
  if (s.has("events")) d.events = resolve(base, s.get<std::string>("events", ""));
  d.perturbations = s.get<std::size_t>("perturbations", d.perturbations);
  d.probability = s.get<double>("p_z", d.probability);
  if (!(d.probability >= 0.0 && d.probability <= 1.0)) s.fail("p_z", "must lie in [0, 1]");
  d.interval = s.get<double>("interval", d.interval);
  if (!(d.interval > 0.0)) s.fail("interval", "must be positive");
  if (s.has("aging")) d.aging = parse_aging(s.raw("aging"));
  s.finish();
  return d;
}

}  // namespace

Config parse_config(const json& j, const std::filesystem::path& base_dir) {
  Section s(j, "");
  Config c;
  c.base_dir = base_dir;
  c.seed = s.maybe<std::uint64_t>("seed");
  if (s.has("output")) c.output = resolve(base_dir, s.get<std::string>("output", ""));
  if (s.has("generator")) c.generator = parse_generator(s.raw("generator"));
  if (c.generator && c.seed && !j.at("generator").contains("seed")) c.generator->seed = *c.seed;
  if (s.has("model")) {
    Section m(s.raw("model"), "model");
    ModelSource src;
    if (!m.has("matrix")) m.fail("matrix", "required");
    if (!m.has("observations")) m.fail("observations", "required");
    src.matrix = resolve(base_dir, m.get<std::string>("matrix", ""));
    src.observations = resolve(base_dir, m.get<std::string>("observations", ""));
    if (m.has("partition")) src.partition = resolve(base_dir, m.get<std::string>("partition", ""));
    m.finish();
    c.model = src;
  }
  if (s.has("schedule")) c.schedule = parse_schedule(s.raw("schedule"));
  if (s.has("run")) c.run = parse_run(s.raw("run"));
  if (s.has("damping")) c.damping = parse_damping(s.raw("damping"));
  if (s.has("experiment")) c.experiment = parse_experiment(s.raw("experiment"), c);
  if (s.has("dynamic")) c.dynamic = parse_dynamic(s.raw("dynamic"), base_dir);
  s.finish();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace agbp
