#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "deepcas/scheduling_env.hpp"

namespace deepcas {

enum class LrDecayMode {
  per_epoch,  // lr0 / (1 + decay * epoch)
  per_step,   // lr0 / (1 + decay * optimizer_step)
  none,
};

struct DqnConfig {
  double gamma = 0.95;
  double learning_rate = 1e-4;
  double lr_decay = 0.001;
  LrDecayMode lr_decay_mode = LrDecayMode::per_epoch;
  std::size_t hidden_units = 1024;
  std::size_t replay_capacity = 20000;
  std::size_t batch_size = 32;
  std::size_t warmup = 1000;  // transitions stored before the first update
  double epsilon_rate = 0.9;
  double epsilon_floor = 0.001;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double huber_delta = 0.0;  // TD residual clip; 0 keeps the plain squared loss
};

double learning_rate_at(const DqnConfig& dqn, int epoch, std::uint64_t optimizer_step);

struct ExperimentConfig {
  std::string name = "experiment";
  EnvConfig env;
  DqnConfig dqn;
  int epochs = 200;
  int monte_carlo_runs = 30;
  std::uint64_t master_seed = 1;
  int checkpoint_interval = 0;  // epochs between checkpoints; 0 = final only
  int eval_runs = 100;
  int threads = 0;              // 0 = hardware concurrency
  double stability_factor = 2.0;
  std::string output_dir = "out";

  nlohmann::json source;        // effective JSON after overrides
};

// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

// Reads a JSON config and applies "path.to.field=value" overrides first.
// Values are parsed as JSON when possible, otherwise taken as strings.
ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides = {});

void apply_override(nlohmann::json& j, const std::string& assignment);

// FNV-1a 64 over the compact dump of the effective config.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string hex64(std::uint64_t v);

// DEEPCAS_OUTPUT_DIR, if set, replaces cfg.output_dir.
std::string resolve_output_dir(const ExperimentConfig& cfg);

Matrix parse_matrix(const nlohmann::json& j, const std::string& field);
nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace deepcas
