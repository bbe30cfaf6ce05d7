#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "deepcas/checkpoint.hpp"
#include "deepcas/config.hpp"
#include "deepcas/dqn.hpp"
#include "deepcas/scheduling_env.hpp"

namespace deepcas {

struct EpochMetrics {
  int epoch = 0;
  double total_loss = 0.0;  // sum over stages and loops, terminal cost included
  double episode_return = 0.0;
  double epsilon = 0.0;
  double learning_rate = 0.0;
  double mean_td_loss = 0.0;  // average minibatch loss; 0 before warm-up ends
  std::size_t updates = 0;
  std::size_t replay_size = 0;
  double running_avg_stage_loss = 0.0;  // (1/T) sum_t J(t)
  bool nonstationary = false;
  std::vector<double> allocation;
};

// Running average (1/n) sum_{t<=n} J(t) of a stage-loss stream, and a flag
// raised when the mean over the last quarter of the stream exceeds `factor`
// times the running average at the stream's midpoint.
struct StabilityReport {
  std::vector<double> running_average;
  double last_quartile_mean = 0.0;
  double midpoint_average = 0.0;
  bool nonstationary = false;
};

StabilityReport stability_diagnostic(std::span<const double> losses, double factor = 2.0);

// Seed-splitting rules.
std::uint64_t run_seed(std::uint64_t master_seed, int run_index);
std::uint64_t episode_seed(std::uint64_t run_seed, int epoch);

// One DQN training run. Replay memory, optimizer state and the exploration
// stream persist across epochs.
class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, std::shared_ptr<const EnvModel> model,
          std::uint64_t run_seed);
  Trainer(const ExperimentConfig& cfg, std::shared_ptr<const EnvModel> model, TrainerState state);

  EpochMetrics run_epoch();

  int epoch() const { return state_.epoch; }
  const TrainerState& state() const { return state_; }
  const QNetwork& network() const { return state_.net; }

 private:
  DqnConfig dqn_;
  double stability_factor_;
  std::shared_ptr<const EnvModel> model_;
  SchedulingEnv env_;
  TrainerState state_;
};

void write_metrics_header(std::ostream& os, int subsystems);
void write_metrics_row(std::ostream& os, const EpochMetrics& m);

struct TrainingOutputs {
  std::string metrics_csv;
  std::string final_checkpoint;
  std::string manifest;
  std::vector<EpochMetrics> metrics;
};

// Trains run 0 of cfg.master_seed for cfg.epochs epochs into `out_dir`:
// metrics.csv, checkpoint_final.ckpt (plus checkpoint_epoch_NNNN.ckpt every
// checkpoint_interval epochs) and manifest.json. With `resume_from`, training
// continues from that checkpoint. A non-finite update aborts the run after
// writing checkpoint_last_good.ckpt.
TrainingOutputs run_training(const ExperimentConfig& cfg, const std::string& out_dir,
                             const std::string& resume_from = "");

// Trains one run in memory and returns its per-epoch metrics.
std::vector<EpochMetrics> train_run(const ExperimentConfig& cfg,
                                    std::shared_ptr<const EnvModel> model, int run_index,
                                    TrainerState* final_state = nullptr);

struct CurvePoint {
  int epoch = 0;
  double mean_total_loss = 0.0;
  double stderr_total_loss = 0.0;
  double mean_return = 0.0;
  std::vector<double> mean_allocation;
};

struct MonteCarloResult {
  std::vector<CurvePoint> curve;
  std::vector<std::vector<EpochMetrics>> runs;
  std::vector<TrainerState> final_states;
};

// cfg.monte_carlo_runs independent trainings with seeds run_seed(master, k),
// executed on a worker pool and reduced in run order.
MonteCarloResult run_monte_carlo(const ExperimentConfig& cfg, bool keep_states = false);

void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& curve, int subsystems);

struct EvaluationResult {
  double mean_loss = 0.0;
  double stderr_loss = 0.0;
  std::vector<double> allocation;
  int runs = 0;
};

// Greedy (epsilon = 0) rollouts without training. Episode k uses
// derive_seed(master_seed, k, StreamTag::evaluation).
EvaluationResult evaluate_policy(const QNetwork& net, const ExperimentConfig& cfg,
                                 std::shared_ptr<const EnvModel> model, int runs);
EvaluationResult evaluate_policy(const std::string& checkpoint, const ExperimentConfig& cfg,
                                 int runs);

std::string manifest_json(const ExperimentConfig& cfg, const std::string& command);

}  // namespace deepcas
