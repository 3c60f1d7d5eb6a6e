#include "agbp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include "agbp/analysis.hpp"
#include "agbp/error.hpp"
#include "agbp/io.hpp"

namespace agbp {

double compute_kappa(const FactorClassification& classification, std::string* warning) {
  double total = 0.0;
  double largest = 0.0;
  for (std::size_t i = 0; i < classification.cluster_count; ++i) {
    total += static_cast<double>(classification.internal_edges[i] + classification.tie_edges[i]);
    largest = std::max(largest, static_cast<double>(classification.internal_edges[i]));
  }
  if (total == 0.0) throw ValidationError("kappa: classification has no edges");
  if (warning != nullptr) {
    *warning = classification.cluster_count == 1
                   ? "kappa: single cluster, kappa = 1 lies outside (0, 1)"
                   : std::string();
  }
  return largest / total;
}

double compute_scale_factor(std::size_t nu, std::size_t nu_s, std::size_t nu_g, std::size_t nu_l,
                            double kappa) {
  if (nu_s == 0 || nu_g == 0) throw ValidationError("scale factor: nu_s and nu_g must be positive");
  const double per_sequence = static_cast<double>(nu_g + nu_l);
  return (static_cast<double>(nu) - kappa * static_cast<double>(nu_s) * per_sequence) /
         (static_cast<double>(nu_s) * static_cast<double>(nu_g));
}

double lower_median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

void ExperimentConfig::validate() const {
  if (scenarios.empty()) throw ValidationError("experiment: no scenarios");
  for (const Scenario& s : scenarios) {
    try {
      s.spec.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("experiment: scenario '" + s.name + "': " + e.what());
    }
  }
  if (repetitions < 1) throw ValidationError("experiment: repetitions must be at least 1");
  if (!(tolerance > 0.0)) throw ValidationError("experiment: tolerance must be positive");
  if (nu_g_grid.empty() || nu_l_grid.empty()) throw ValidationError("experiment: empty schedule grid");
  for (std::size_t g : nu_g_grid) {
    if (g < 1) throw ValidationError("experiment: nu_g values must be at least 1");
  }
  if (!(perturbation_probability >= 0.0 && perturbation_probability <= 1.0)) {
    throw ValidationError("experiment: perturbation probability must lie in [0, 1]");
  }
  if (threads < 1) throw ValidationError("experiment: threads must be at least 1");
  if (damping) damping->validate();
}

std::uint64_t trial_seed(const ExperimentConfig& config, std::size_t scenario_index,
                         std::size_t repetition) {
  return config.base_seed + static_cast<std::uint64_t>(scenario_index) * config.repetitions + repetition;
}

namespace {

std::string grid_label(const std::string& name, std::size_t nu_g, std::size_t nu_l) {
  return name + "/g" + std::to_string(nu_g) + "/l" + std::to_string(nu_l);
}

}  // namespace

std::vector<MetricRecord> run_trial(const ExperimentConfig& config, std::size_t scenario_index,
                                    std::size_t repetition) {
  const Scenario& scenario = config.scenarios.at(scenario_index);
  const std::uint64_t seed = trial_seed(config, scenario_index, repetition);
  std::vector<MetricRecord> rows;
  for (std::size_t g : config.nu_g_grid) {
    for (std::size_t l : config.nu_l_grid) {
      MetricRecord r;
      r.scenario = grid_label(scenario.name, g, l);
      r.seed = seed;
      r.nu_g = g;
      r.nu_l = l;
      rows.push_back(std::move(r));
    }
  }
  try {
    GeneratorSpec spec = scenario.spec;
    spec.seed = seed;
    const GeneratedModel gen = generate_model(spec);
    const FactorGraph graph = build_factor_graph(gen.model);
    const FactorClassification cls = classify_factors(graph, gen.partition, gen.row_home);
    const double kappa = compute_kappa(cls);

    RunConfig run;
    run.tolerance = config.tolerance;
    run.max_iterations = config.max_iterations;
    run.max_sequences = config.max_sequences;
    run.prior_variance = config.prior_variance;
    run.oracle = wls_solve(gen.model);
    if (config.damping) {
      DampingConfig d = *config.damping;
      d.seed = seed ^ 0x9e3779b97f4a7c15ULL;
      run.damping = d;
    }
    RunConfig sync_run = run;
    if (!config.damp_synchronous) sync_run.damping.reset();
    const RunResult sync = run_synchronous(graph, sync_run);

    for (MetricRecord& r : rows) {
      const RunResult alt =
          run_alternating(graph, cls, Schedule::alternating(r.nu_g, r.nu_l, config.order), run);
      r.kappa = kappa;
      r.nu = sync.nu;
      r.nu_s = alt.nu_s;
      r.sync_converged = sync.converged;
      r.agbp_converged = alt.converged;
      r.rmse_sync = sync.final_rmse();
      r.rmse_agbp = alt.final_rmse();
      if (sync.converged && alt.converged && alt.nu_s > 0) {
        r.phi = compute_scale_factor(r.nu, r.nu_s, r.nu_g, r.nu_l, r.kappa);
      }
    }
  } catch (const Error& e) {
    for (MetricRecord& r : rows) r.error = e.what();
  }
  return rows;
}

SweepResult run_sweep(const ExperimentConfig& config) {
  config.validate();
  const std::size_t trials = config.scenarios.size() * config.repetitions;
  std::vector<std::vector<MetricRecord>> slots(trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < trials; k = next++) {
      slots[k] = run_trial(config, k / config.repetitions, k % config.repetitions);
    }
  };
  const std::size_t workers = std::min(config.threads, trials);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  // Order rows by scenario, then grid point, then repetition.
  SweepResult out;
  const std::size_t grid = config.nu_g_grid.size() * config.nu_l_grid.size();
  for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
    for (std::size_t g = 0; g < grid; ++g) {
      for (std::size_t r = 0; r < config.repetitions; ++r) {
        out.records.push_back(slots[s * config.repetitions + r][g]);
      }
    }
  }
  out.summaries = summarise(out.records);
  return out;
}

std::vector<ScenarioSummary> summarise(const std::vector<MetricRecord>& records) {
  std::vector<ScenarioSummary> out;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<double>> phi, nu, nu_s;
  for (const MetricRecord& r : records) {
    auto [it, inserted] = index.try_emplace(r.scenario, out.size());
    if (inserted) {
      out.push_back({});
      out.back().scenario = r.scenario;
      phi.emplace_back();
      nu.emplace_back();
      nu_s.emplace_back();
    }
    const std::size_t k = it->second;
    ScenarioSummary& s = out[k];
    ++s.trials;
    if (!r.error.empty()) {
      ++s.failures;
      continue;
    }
    s.sync_convergence += r.sync_converged ? 1.0 : 0.0;
    s.agbp_convergence += r.agbp_converged ? 1.0 : 0.0;
    if (r.sync_converged) nu[k].push_back(static_cast<double>(r.nu));
    if (r.agbp_converged) nu_s[k].push_back(static_cast<double>(r.nu_s));
    if (r.phi) phi[k].push_back(*r.phi);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    ScenarioSummary& s = out[k];
    const double n = static_cast<double>(s.trials);
    s.sync_convergence /= n;
    s.agbp_convergence /= n;
    s.phi_count = phi[k].size();
    s.median_phi = lower_median(phi[k]);
    s.median_nu = lower_median(nu[k]);
    s.median_nu_s = lower_median(nu_s[k]);
  }
  return out;
}

namespace {

std::string cell(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

}  // namespace

void write_trials_csv(std::ostream& out, const std::vector<MetricRecord>& records) {
  out << "scenario,seed,nu,nu_s,nu_g,nu_l,kappa,phi,sync_converged,agbp_converged,rmse_sync,rmse_agbp\n";
  for (const MetricRecord& r : records) {
    out << r.scenario << ',' << r.seed << ',';
    if (r.error.empty()) {
      out << r.nu << ',' << r.nu_s << ',' << r.nu_g << ',' << r.nu_l << ',' << format_double(r.kappa)
          << ',' << (r.phi ? format_double(*r.phi) : std::string()) << ',' << int(r.sync_converged)
          << ',' << int(r.agbp_converged) << ',' << cell(r.rmse_sync) << ',' << cell(r.rmse_agbp)
          << '\n';
    } else {
      out << ",," << r.nu_g << ',' << r.nu_l << ",,,0,0,,\n";
    }
  }
}

void write_summary_csv(std::ostream& out, const std::vector<ScenarioSummary>& summaries) {
  out << "# medians are lower medians: element floor((n-1)/2) of the sorted values\n";
  out << "scenario,trials,failures,sync_convergence,agbp_convergence,phi_count,median_phi,"
         "median_nu,median_nu_s\n";
  for (const ScenarioSummary& s : summaries) {
    out << s.scenario << ',' << s.trials << ',' << s.failures << ',' << format_double(s.sync_convergence)
        << ',' << format_double(s.agbp_convergence) << ',' << s.phi_count << ',' << cell(s.median_phi)
        << ',' << cell(s.median_nu) << ',' << cell(s.median_nu_s) << '\n';
  }
}

void write_sweep(const SweepResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write " + (dir / name).string());
    return f;
  };
  std::ofstream trials = open("trials.csv");
  write_trials_csv(trials, result.records);
  std::ofstream summary = open("summary.csv");
  write_summary_csv(summary, result.summaries);
  std::ofstream failures = open("failures.csv");
  failures << "scenario,seed,error\n";
  for (const MetricRecord& r : result.records) {
    if (r.error.empty()) continue;
    std::string msg = r.error;
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    failures << r.scenario << ',' << r.seed << ',' << msg << '\n';
  }
}

}  // namespace agbp
