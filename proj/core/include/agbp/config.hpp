#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agbp/dynamics.hpp"
#include "agbp/engine.hpp"
#include "agbp/experiment.hpp"
#include "agbp/model.hpp"
#include "agbp/scheduler.hpp"

namespace agbp {

// JSON configuration. Every object rejects unknown keys so that typos fail
// loudly; all errors are ValidationError naming the offending key.

GeneratorSpec parse_generator(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorSpec& spec);

DampingConfig parse_damping(const nlohmann::json& j);
Schedule parse_schedule(const nlohmann::json& j);

enum class ConvergenceMode : std::uint8_t { oracle, residual };

struct RunSettings {
  RunConfig run;
  ConvergenceMode mode = ConvergenceMode::oracle;
};
RunSettings parse_run(const nlohmann::json& j);

/// Which factors an aging rule applies to.
struct AgingRule {
  GrowthKind kind = GrowthKind::logarithmic;
  double alpha = 1.0;
  double beta = 0.0;
  double hold = 0.0;                     // rho - tau
  std::optional<double> saturate_after;  // theta - tau
  std::optional<double> ceiling;         // absolute ceiling
  bool dependent_rows = false;           // extra rows of rectangular clusters
  std::vector<std::size_t> factors;
  double probability = 1.0;              // share of the selected factors that age

  /// Model of one factor whose observation arrived at `arrival` with `variance`.
  AgingModel model_for(double arrival, double variance) const;
};
std::vector<AgingRule> parse_aging(const nlohmann::json& j);

struct ModelSource {
  std::filesystem::path matrix;
  std::filesystem::path observations;
  std::filesystem::path partition;  // empty: taken from the generator, or single cluster
};

struct DynamicSettings {
  std::filesystem::path events;  // CSV time,factor,z,v; empty when synthetic
  std::size_t perturbations = 0;  // synthetic events: perturbation rounds
  double probability = 0.1;       // p_z of each round
  double interval = 1.0;          // ticks between rounds
  std::vector<AgingRule> aging;
};

/// The whole configuration file. Each subcommand reads the sections it needs.
struct Config {
  std::filesystem::path base_dir;  // directory of the file; relative paths resolve here
  std::optional<GeneratorSpec> generator;
  std::optional<ModelSource> model;
  Schedule schedule = Schedule::alternating(1, 30);
  RunSettings run;
  std::optional<DampingConfig> damping;
  std::optional<ExperimentConfig> experiment;
  DynamicSettings dynamic;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
};

Config parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
/// Reads and parses a file. A missing or unreadable file is a ValidationError
/// carrying the path.
Config load_config(const std::filesystem::path& path);

}  // namespace agbp
