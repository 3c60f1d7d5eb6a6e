#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "agbp/engine.hpp"
#include "agbp/graph.hpp"
#include "agbp/model.hpp"
#include "agbp/scheduler.hpp"

namespace agbp {

/// kappa = max_i lambda_i / sum_j (lambda_j + gamma_j). Throws ValidationError
/// when the classification has no edges. `warning` is set for s = 1.
double compute_kappa(const FactorClassification& classification, std::string* warning = nullptr);

/// phi = (nu - kappa nu_s (nu_g + nu_l)) / (nu_s nu_g).
double compute_scale_factor(std::size_t nu, std::size_t nu_s, std::size_t nu_g, std::size_t nu_l,
                            double kappa);

/// Lower median (element floor((n-1)/2) of the sorted values). NaN when empty.
double lower_median(std::vector<double> values);

struct Scenario {
  std::string name;
  GeneratorSpec spec;
};

struct ExperimentConfig {
  std::vector<Scenario> scenarios;
  std::vector<std::size_t> nu_g_grid{1};
  std::vector<std::size_t> nu_l_grid{1, 5, 30, 60, 90};
  SequenceOrder order = SequenceOrder::global_first;
  /// Damping of the alternating runs; `damp_synchronous` extends it.
  std::optional<DampingConfig> damping;
  bool damp_synchronous = false;
  std::size_t repetitions = 500;
  double tolerance = kDefaultTolerance;
  std::size_t max_iterations = kDefaultMaxIterations;
  std::size_t max_sequences = kDefaultMaxSequences;
  double prior_variance = kDefaultPriorVariance;
  double perturbation_probability = 0.1;
  std::uint64_t base_seed = 0;
  std::size_t threads = 1;
  std::filesystem::path output_dir = "out";

  void validate() const;
};

/// seed = base_seed + scenario_index * repetitions + repetition.
std::uint64_t trial_seed(const ExperimentConfig& config, std::size_t scenario_index,
                         std::size_t repetition);

struct MetricRecord {
  std::string scenario;  // "<name>/g<nu_g>/l<nu_l>"
  std::uint64_t seed = 0;
  std::size_t nu = 0;
  std::size_t nu_s = 0;
  std::size_t nu_g = 0;
  std::size_t nu_l = 0;
  double kappa = 0.0;
  std::optional<double> phi;  // only when both runs converged
  bool sync_converged = false;
  bool agbp_converged = false;
  double rmse_sync = 0.0;
  double rmse_agbp = 0.0;
  std::string error;  // non-empty when the trial failed
};

struct ScenarioSummary {
  std::string scenario;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double sync_convergence = 0.0;
  double agbp_convergence = 0.0;
  std::size_t phi_count = 0;
  double median_phi = 0.0;
  double median_nu = 0.0;
  double median_nu_s = 0.0;
};

struct SweepResult {
  std::vector<MetricRecord> records;  // (scenario, grid point, repetition) order
  std::vector<ScenarioSummary> summaries;
};

/// Runs every trial of the sweep. Deterministic in the config; trial
/// failures are recorded in MetricRecord::error.
SweepResult run_sweep(const ExperimentConfig& config);

/// One trial: every grid schedule on one generated instance.
std::vector<MetricRecord> run_trial(const ExperimentConfig& config, std::size_t scenario_index,
                                    std::size_t repetition);

std::vector<ScenarioSummary> summarise(const std::vector<MetricRecord>& records);

/// `scenario,seed,nu,nu_s,nu_g,nu_l,kappa,phi,sync_converged,agbp_converged,rmse_sync,rmse_agbp`
void write_trials_csv(std::ostream& out, const std::vector<MetricRecord>& records);
void write_summary_csv(std::ostream& out, const std::vector<ScenarioSummary>& summaries);
/// Writes trials.csv, summary.csv and failures.csv into `dir`.
void write_sweep(const SweepResult& result, const std::filesystem::path& dir);

}  // namespace agbp
