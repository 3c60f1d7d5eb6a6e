#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "agbp/analysis.hpp"
#include "agbp/config.hpp"
#include "agbp/dynamics.hpp"
#include "agbp/error.hpp"
#include "agbp/experiment.hpp"
#include "agbp/io.hpp"
#include "agbp/scheduler.hpp"

namespace agbp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tol;
  bool quiet = false;
};

// A model ready to run, with whatever block provenance is known.
struct Instance {
  LinearModel model;
  ClusterPartition partition;
  std::vector<std::size_t> row_home;  // empty for loaded models
  std::uint64_t seed = 0;
  std::optional<GeneratorSpec> spec;
};

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

Config load(const Options& o) {
  Config c = load_config(o.config);
  if (o.seed) {
    c.seed = o.seed;
    if (c.generator) c.generator->seed = *o.seed;
    if (c.experiment) c.experiment->base_seed = *o.seed;
  }
  if (o.out) {
    c.output = fs::path(*o.out);
    if (c.experiment) c.experiment->output_dir = *o.out;
  }
  if (o.tol) {
    if (!(*o.tol > 0.0)) throw ValidationError("--tol must be positive");
    c.run.run.tolerance = *o.tol;
    if (c.experiment) c.experiment->tolerance = *o.tol;
  }
  return c;
}

Instance instance(const Config& c) {
  Instance inst;
  if (c.model) {
    inst.model = load_model(c.model->matrix, c.model->observations);
    inst.partition = c.model->partition.empty()
                         ? ClusterPartition::single(inst.model.cols())
                         : load_partition(c.model->partition, inst.model.cols());
    inst.seed = c.seed.value_or(0);
    return inst;
  }
  if (!c.generator) throw ValidationError("config: a 'model' or 'generator' section is required");
  GeneratedModel g = generate_model(*c.generator);
  inst.model = std::move(g.model);
  inst.partition = std::move(g.partition);
  inst.row_home = std::move(g.row_home);
  inst.seed = c.generator->seed;
  inst.spec = c.generator;
  return inst;
}

RunConfig run_config(const Config& c, const LinearModel& model) {
  RunConfig run = c.run.run;
  if (c.run.mode == ConvergenceMode::oracle) run.oracle = wls_solve(model);
  run.damping = c.damping;
  return run;
}

int cmd_generate(const Options& o, std::ostream& out, std::ostream& err) {
  const Config c = load(o);
  if (!c.generator) throw ValidationError("config: generate needs a 'generator' section");
  const GeneratedModel g = generate_model(*c.generator);
  const fs::path dir = c.output.value_or(".");
  fs::create_directories(dir);
  save_model(g.model, {dir / "H.mtx", dir / "z.csv"});
  save_partition(g.partition, dir / "partition.csv");
  write_json(dir / "generator.json", to_json(*c.generator));
  const json summary = {{"rows", g.model.rows()},
                        {"cols", g.model.cols()},
                        {"nonzeros", g.model.nonzeros()},
                        {"seed", c.generator->seed},
                        {"matrix", (dir / "H.mtx").string()},
                        {"observations", (dir / "z.csv").string()},
                        {"partition", (dir / "partition.csv").string()}};
  out << summary.dump(2) << '\n';
  if (!o.quiet) err << "generate: wrote model to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_run(const Options& o, std::ostream& out, std::ostream& err) {
  const Config c = load(o);
  const Instance inst = instance(c);
  const FactorGraph graph = build_factor_graph(inst.model);
  const FactorClassification cls = classify_factors(graph, inst.partition, inst.row_home);
  const RunConfig run = run_config(c, inst.model);
  MessageState state = init_messages(graph, run.prior_mean, run.prior_variance);
  if (!o.quiet) err << "run: " << c.schedule.describe() << " on " << inst.model.rows() << "x" << inst.model.cols() << '\n';
  const RunResult result = run_schedule(graph, cls, c.schedule, state, run);
  json summary = run_summary_json(result, c.schedule, inst.seed);
  out << summary.dump(2) << '\n';
  if (c.output) {
    fs::create_directories(*c.output);
    write_json(*c.output / "run.json", summary);
    std::ofstream est(*c.output / "estimate.csv");
    if (!est) throw Error("cannot write " + (*c.output / "estimate.csv").string());
    est << "variable,mean,variance\n";
    for (std::size_t j = 0; j < result.estimate.size(); ++j) {
      est << j << ',' << format_double(result.estimate[j]) << ',' << format_double(result.variances[j]) << '\n';
    }
  }
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  Config c = load(o);
  if (!c.experiment) {
    if (!c.generator) throw ValidationError("config: sweep needs an 'experiment' or 'generator' section");
    c.experiment = ExperimentConfig{};
    c.experiment->scenarios.push_back({"baseline", *c.generator});
    c.experiment->damping = c.damping;
    c.experiment->tolerance = c.run.run.tolerance;
    c.experiment->max_iterations = c.run.run.max_iterations;
    c.experiment->max_sequences = c.run.run.max_sequences;
    c.experiment->prior_variance = c.run.run.prior_variance;
    c.experiment->base_seed = c.seed.value_or(0);
    if (c.output) c.experiment->output_dir = *c.output;
  }
  const ExperimentConfig& e = *c.experiment;
  if (!o.quiet) {
    err << "sweep: " << e.scenarios.size() << " scenario(s), " << e.repetitions << " repetition(s), "
        << e.nu_g_grid.size() * e.nu_l_grid.size() << " schedule(s)\n";
  }
  const SweepResult result = run_sweep(e);
  write_sweep(result, e.output_dir);
  json rows = json::array();
  for (const ScenarioSummary& s : result.summaries) {
    rows.push_back({{"scenario", s.scenario},
                    {"trials", s.trials},
                    {"failures", s.failures},
                    {"sync_convergence", s.sync_convergence},
                    {"agbp_convergence", s.agbp_convergence},
                    {"median_phi", number(s.median_phi)}});
  }
  out << json{{"output", e.output_dir.string()}, {"summary", rows}}.dump(2) << '\n';
  return kExitOk;
}

int cmd_analyze(const Options& o, std::ostream& out, std::ostream& err) {
  const Config c = load(o);
  const Instance inst = instance(c);
  const FactorGraph graph = build_factor_graph(inst.model);
  const FactorClassification cls = classify_factors(graph, inst.partition, inst.row_home);
  if (!o.quiet) err << "analyze: building the mean recursion\n";
  const SpectralDecomposition d = decompose(graph, &cls);
  SpectralOptions opts;
  opts.seed = inst.seed;
  const double rho = spectral_radius(d.omega, opts);
  json report = {{"d", d.dimension},
                 {"rho", rho},
                 {"converges_predicted", rho < 1.0},
                 {"variance_iterations", d.v_star.iterations}};
  try {
    const Eigen::VectorXd m = fixed_point_means(d.omega, d.c_f);
    report["fixed_point_rmse_vs_wls"] =
        number(rmse(marginals_from_messages(graph, d.v_star, m), wls_solve(inst.model)));
  } catch (const NumericalError& e) {
    report["fixed_point_rmse_vs_wls"] = nullptr;
    report["fixed_point_error"] = e.what();
  }
  out << report.dump(2) << '\n';
  if (c.output) {
    fs::create_directories(*c.output);
    write_json(*c.output / "analysis.json", report);
  }
  return kExitOk;
}

// Factors selected by an aging rule.
std::vector<std::size_t> aging_targets(const AgingRule& rule, const Instance& inst) {
  if (!rule.dependent_rows) {
    for (std::size_t f : rule.factors) {
      if (f >= inst.model.rows()) {
        throw ValidationError("config: dynamic.aging: factor " + std::to_string(f) + " out of range");
      }
    }
    return rule.factors;
  }
  if (!inst.spec || inst.spec->kind != MatrixKind::rectangular) {
    throw ValidationError("config: dynamic.aging: 'dependent' needs a rectangular generator");
  }
  std::vector<std::size_t> out;
  for (std::size_t row = 0; row < inst.model.rows(); ++row) {
    if (row % inst.spec->rows_per_cluster >= inst.spec->cols_per_cluster) out.push_back(row);
  }
  return out;
}

int cmd_dynamic(const Options& o, std::ostream& out, std::ostream& err) {
  const Config c = load(o);
  const Instance inst = instance(c);
  FactorGraph graph = build_factor_graph(inst.model);
  const FactorClassification cls = classify_factors(graph, inst.partition, inst.row_home);
  const DynamicSettings& ds = c.dynamic;

  DynamicConfig dyn;
  dyn.schedule = c.schedule;
  dyn.run = run_config(c, inst.model);
  std::mt19937_64 rng(inst.seed ^ 0x5851f42d4c957f2dULL);
  if (!ds.events.empty()) dyn.events = load_events(ds.events);
  // Synthetic rounds: perturb a scratch copy and replay the changes as events.
  FactorGraph scratch = graph;
  for (std::size_t r = 1; r <= ds.perturbations; ++r) {
    const double t = static_cast<double>(r) * ds.interval;
    dyn.checkpoints.push_back(t);
    for (std::size_t f : perturb_observations(scratch, ds.probability, rng)) {
      dyn.events.push_back({t, f, scratch.observation(f), scratch.variance(f)});
    }
  }
  std::stable_sort(dyn.events.begin(), dyn.events.end(),
                   [](const ObservationEvent& a, const ObservationEvent& b) { return a.time < b.time; });
  std::bernoulli_distribution pick;
  for (const AgingRule& rule : ds.aging) {
    pick = std::bernoulli_distribution(rule.probability);
    for (std::size_t f : aging_targets(rule, inst)) {
      if (pick(rng)) dyn.aging.push_back({f, rule.model_for(0.0, graph.variance(f))});
    }
  }
  if (!o.quiet) {
    err << "dynamic: " << dyn.events.size() << " event(s), " << dyn.aging.size() << " aging factor(s)\n";
  }
  const std::vector<RunResult> results = run_dynamic(graph, cls, dyn);

  std::vector<double> times{0.0};
  for (const ObservationEvent& e : dyn.events) times.push_back(e.time);
  times.insert(times.end(), dyn.checkpoints.begin(), dyn.checkpoints.end());
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  json rows = json::array();
  for (std::size_t k = 0; k < results.size(); ++k) {
    json j = run_summary_json(results[k], c.schedule, inst.seed);
    j["interval"] = k;
    j["time"] = k < times.size() ? json(times[k]) : json(nullptr);
    rows.push_back(std::move(j));
  }
  out << rows.dump(2) << '\n';
  if (c.output) {
    fs::create_directories(*c.output);
    std::ofstream csv(*c.output / "dynamic.csv");
    if (!csv) throw Error("cannot write " + (*c.output / "dynamic.csv").string());
    csv << "interval,time,converged,diverged,nu,nu_s,rmse_final\n";
    for (const json& j : rows) {
      csv << j["interval"].get<std::size_t>() << ','
          << (j["time"].is_null() ? std::string() : format_double(j["time"].get<double>())) << ','
          << int(j["converged"].get<bool>()) << ',' << int(j["diverged"].get<bool>()) << ','
          << j["nu"].get<std::size_t>() << ',' << j["nu_s"].get<std::size_t>() << ','
          << (j["rmse_final"].is_null() ? std::string() : format_double(j["rmse_final"].get<double>()))
          << '\n';
    }
  }
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "JSON configuration file")->required();
  sub->add_option("--seed", o.seed, "override the seed");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--tol", o.tol, "override the convergence tolerance");
  sub->add_flag("--quiet", o.quiet, "suppress progress messages");
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian belief propagation on clustered factor graphs", "agbp"};
  app.require_subcommand(1);
  Options o;
  using Command = int (*)(const Options&, std::ostream&, std::ostream&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"generate", "draw a random clustered model and write it to disk", cmd_generate},
      {"run", "run one schedule and print the run summary", cmd_run},
      {"sweep", "Monte Carlo sweep; writes trials.csv and summary.csv", cmd_sweep},
      {"analyze", "spectral radius and fixed point of the mean recursion", cmd_analyze},
      {"dynamic", "warm-started runs across observation and aging events", cmd_dynamic},
  };
  std::map<CLI::App*, Command> handlers;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, o);
    handlers[sub] = fn;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitConfig;
  }

  try {
    for (const auto& [sub, fn] : handlers) {
      if (sub->parsed()) return fn(o, out, err);
    }
    err << app.help();
    return kExitConfig;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace agbp::cli
