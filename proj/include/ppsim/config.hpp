#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ppsim/consensus.hpp"
#include "ppsim/objectives.hpp"
#include "ppsim/trainer.hpp"

namespace ppsim {

// Declarative objective description, rebuilt identically from any echo.
struct ObjectiveSpecConfig {
  std::string kind = "quadratic";  // quadratic | multi_basin | mlp

  // quadratic
  std::size_t dim = 2;
  double f0 = 0.0;
  std::optional<std::vector<double>> curvatures;  // explicit spectrum
  std::optional<std::vector<double>> center;
  double curvature_min = 0.5;  // used when curvatures is absent
  double curvature_max = 2.0;
  std::uint64_t curvature_seed = 0;

  // multi_basin
  struct BasinConfig {
    std::vector<double> center;
    double width = 1.0;
    double weight = 1.0;
  };
  std::vector<BasinConfig> basins;
  double temperature = 1.0;

  // mlp
  MlpSpec mlp;
};

struct ExperimentConfig {
  ObjectiveSpecConfig objective;
  int workers = 4;
  PullPushConfig pull_push;
  LocalOptConfig local_opt;
  NoiseModel noise;
  TrainerFlags trainer_flags;
  long long total_iters = 100;
  std::uint64_t seed = 1;
  std::optional<int> threads;  // unset: PPSIM_THREADS env or 1
  std::string output_dir = "run";
};

// Parses a JSON config file, then applies dotted-path overrides of the form
// "section.key=value" (values parsed as JSON scalars, bare words as strings).
// Unknown keys anywhere are rejected. Throws ConfigError on any problem.
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        const std::vector<std::string>& overrides = {});

// Same, from an in-memory JSON string (used by the loader and by tests).
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::vector<std::string>& overrides = {});

// Canonical echo with every effective field materialized; feeding it back
// through parse_experiment_config reproduces the same experiment.
std::string resolved_config_json(const ExperimentConfig& cfg);

std::unique_ptr<Objective> build_objective(const ObjectiveSpecConfig& spec);

// Thread-count precedence: explicit argument > config > PPSIM_THREADS > 1.
int resolve_threads(const std::optional<int>& cli_threads, const ExperimentConfig& cfg);

}  // namespace ppsim
