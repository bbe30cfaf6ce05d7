#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "deepcas/combinatorics.hpp"
#include "deepcas/control.hpp"
#include "deepcas/estimation.hpp"
#include "deepcas/plant.hpp"
#include "deepcas/random.hpp"

namespace deepcas {

enum class RewardMode { error_penalty, full_cost };

const char* to_string(RewardMode mode);
RewardMode parse_reward_mode(const std::string& name);

struct EnvConfig {
  std::vector<SubsystemSpec> specs;
  int channels = 1;    // M
  int horizon = 500;   // T
  RewardMode reward_mode = RewardMode::error_penalty;

  int subsystems() const { return static_cast<int>(specs.size()); }
};

// Throws SpecificationError. M == N is only accepted with allow_full_schedule,
// which tests use for the perfect-communication reference.
void validate(const EnvConfig& cfg, bool allow_full_schedule = false);

// Concatenated per-subsystem error vectors, in subsystem order.
using Observation = std::vector<double>;

// Everything about an environment that does not change between episodes.
// Built once and shared read-only by concurrent episodes.
struct EnvModel {
  EnvConfig config;
  std::vector<Plant> plants;
  std::vector<GainSchedule> gains;
  std::vector<FilterCovarianceSequence> filter_covariances;
  std::vector<int> offsets;  // start of each subsystem's block in an Observation
  std::size_t observation_dim = 0;
  std::size_t action_count = 0;

  int subsystems() const { return config.subsystems(); }
  int channels() const { return config.channels; }
  int horizon() const { return config.horizon; }
};

std::shared_ptr<const EnvModel> make_env_model(EnvConfig cfg, bool allow_full_schedule = false);

struct LoopState {
  PlantState plant;
  SensorFilter sensor;
  ControllerEstimator controller;
  Vector u_prev;
  RandomSource rng;
};

struct StageDiagnostics {
  std::vector<double> stage_cost;     // x'Qx + u'Ru per subsystem
  std::vector<double> error_penalty;  // e'Gamma e per subsystem (post-transmission)
  std::vector<double> error_norm;     // |e| before transmission
  std::vector<double> terminal_cost;  // x_T' Qf x_T, filled on the terminal stage only
};

struct StepOutcome {
  Observation next_obs;
  double reward = 0.0;
  bool terminal = false;
  int stage = 0;  // stage index the action was applied at
  Subset scheduled;
  StageDiagnostics diagnostics;
};

// The scheduling MDP: N loops, M channels, horizon T.
//
// Stage t proceeds as: the observation holds x^s_{t|t} - x^c_{t|t-1} for every
// loop; the scheduler picks M loops, which synchronize their controller
// estimate; every loop applies u_t = -L_t x^c_{t|t}; the reward is computed;
// plants advance and the sensors filter y_{t+1} to build the next observation.
class SchedulingEnv {
 public:
  explicit SchedulingEnv(std::shared_ptr<const EnvModel> model);

  const EnvModel& model() const { return *model_; }

  // Fresh initial conditions; subsystem i draws from
  // derive_seed(episode_seed, i, StreamTag::plant_noise).
  const Observation& reset(std::uint64_t episode_seed);

  StepOutcome step(ActionIndex action);
  StepOutcome step_subset(const Subset& subset);

  const Observation& observation() const { return obs_; }
  int stage() const { return stage_; }
  bool terminal() const { return stage_ >= model_->horizon(); }
  const std::vector<LoopState>& loops() const { return loops_; }

 private:
  void observe();

  std::shared_ptr<const EnvModel> model_;
  std::vector<LoopState> loops_;
  Observation obs_;
  int stage_ = 0;
  bool started_ = false;
};

// Per-stage record of one episode.
struct EpisodeRecord {
  int stage = 0;
  ActionIndex action = 0;
  Subset subset;
  double reward = 0.0;
  std::vector<double> stage_cost;
};

using EpisodeLog = std::vector<EpisodeRecord>;

// Fraction of stages each subsystem was scheduled; sums to M.
std::vector<double> allocation_fractions(const EpisodeLog& log, int subsystems);

void write_episode_csv(std::ostream& os, const EpisodeLog& log, int subsystems);

// Scheduler used for a whole episode: observation and stage -> action.
using SchedulePolicy = std::function<ActionIndex(const Observation&, int stage)>;

struct EpisodeSummary {
  double total_loss = 0.0;  // sum of stage costs plus terminal costs
  double error_term = 0.0;  // sum of e'Gamma e
  double episode_return = 0.0;
  std::vector<int> schedule_counts;
  std::vector<double> stage_losses;  // J(t) = sum_i stage cost at t
};

EpisodeSummary run_episode(SchedulingEnv& env, const SchedulePolicy& policy,
                           std::uint64_t episode_seed, EpisodeLog* log = nullptr);

}  // namespace deepcas
