#include "deepcas/scheduling_env.hpp"

#include <ostream>
#include <string>

#include "deepcas/csv.hpp"
#include "deepcas/errors.hpp"

namespace deepcas {

const char* to_string(RewardMode mode) {
  return mode == RewardMode::full_cost ? "full_cost" : "error_penalty";
}

RewardMode parse_reward_mode(const std::string& name) {
  if (name == "error_penalty") return RewardMode::error_penalty;
  if (name == "full_cost") return RewardMode::full_cost;
  throw SpecificationError("unknown reward mode '" + name + "'");
}

void validate(const EnvConfig& cfg, bool allow_full_schedule) {
  const int N = cfg.subsystems();
  if (N < 1) throw SpecificationError("at least one subsystem is required");
  if (cfg.channels < 1) throw SpecificationError("channel count M must be at least 1");
  if (allow_full_schedule ? cfg.channels > N : cfg.channels >= N)
    throw SpecificationError("channel count M must be smaller than subsystem count N");
  if (cfg.horizon < 1) throw SpecificationError("horizon T must be at least 1");
  for (int i = 0; i < N; ++i) {
    try {
      validate(cfg.specs[i]);
    } catch (const SpecificationError& e) {
      throw SpecificationError("subsystem " + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

std::shared_ptr<const EnvModel> make_env_model(EnvConfig cfg, bool allow_full_schedule) {
  validate(cfg, allow_full_schedule);
  auto model = std::make_shared<EnvModel>();
  const int N = cfg.subsystems();
  model->plants.reserve(N);
  int offset = 0;
  for (const auto& spec : cfg.specs) {
    model->plants.emplace_back(spec);
    model->gains.push_back(riccati_backward(spec, cfg.horizon));
    model->filter_covariances.push_back(kf1_covariances(spec, cfg.horizon));
    model->offsets.push_back(offset);
    offset += static_cast<int>(spec.n());
  }
  model->observation_dim = static_cast<std::size_t>(offset);
  model->action_count = binomial(N, cfg.channels);
  model->config = std::move(cfg);
  return model;
}

SchedulingEnv::SchedulingEnv(std::shared_ptr<const EnvModel> model) : model_(std::move(model)) {
  require(model_ != nullptr, "SchedulingEnv: null model");
  loops_.resize(model_->subsystems());
  obs_.assign(model_->observation_dim, 0.0);
}

void SchedulingEnv::observe() {
  for (int i = 0; i < model_->subsystems(); ++i) {
    const Vector e = error_vector(loops_[i].sensor, loops_[i].controller);
    std::copy(e.data(), e.data() + e.size(), obs_.begin() + model_->offsets[i]);
  }
}

const Observation& SchedulingEnv::reset(std::uint64_t episode_seed) {
  for (int i = 0; i < model_->subsystems(); ++i) {
    const Plant& plant = model_->plants[i];
    const SubsystemSpec& spec = plant.spec();
    LoopState& loop = loops_[i];
    loop.rng = RandomSource(derive_seed(episode_seed, static_cast<std::uint64_t>(i),
                                        tag(StreamTag::plant_noise)));
    loop.plant = plant.sample_initial(loop.rng);
    loop.sensor = kf1_init(spec);
    loop.sensor = kf1_update(spec, loop.sensor, plant.measure(loop.plant, loop.rng));
    loop.controller = kf2_init(spec);
    loop.u_prev = Vector::Zero(spec.m());
  }
  stage_ = 0;
  started_ = true;
  observe();
  return obs_;
}

StepOutcome SchedulingEnv::step(ActionIndex action) {
  return step_subset(action_to_subset(action, model_->subsystems(), model_->channels()));
}

StepOutcome SchedulingEnv::step_subset(const Subset& subset) {
  require(started_, "env_step: reset() has not been called");
  require(!terminal(), "env_step: episode already terminated");
  const int N = model_->subsystems();
  require(static_cast<int>(subset.size()) == model_->channels(),
          "env_step: subset size must equal channel count");
  // Validates ordering and range.
  const ActionIndex action = subset_to_action(subset, N);
  (void)action;

  const int t = stage_;
  StepOutcome out;
  out.stage = t;
  out.scheduled = subset;
  auto& diag = out.diagnostics;
  diag.stage_cost.assign(N, 0.0);
  diag.error_penalty.assign(N, 0.0);
  diag.error_norm.assign(N, 0.0);
  diag.terminal_cost.assign(N, 0.0);

  std::vector<bool> scheduled(N, false);
  for (int s : subset) scheduled[s - 1] = true;

  double penalty_sum = 0.0;
  double cost_sum = 0.0;
  for (int i = 0; i < N; ++i) {
    LoopState& loop = loops_[i];
    const SubsystemSpec& spec = model_->plants[i].spec();
    const GainSchedule& g = model_->gains[i];

    diag.error_norm[i] = error_vector(loop.sensor, loop.controller).norm();
    if (scheduled[i]) loop.controller = kf2_sync(loop.controller, loop.sensor.x_filt);
    const Vector e = error_vector(loop.sensor, loop.controller);
    diag.error_penalty[i] = scheduled[i] ? 0.0 : error_loss_term(g.Gamma[t], e);

    const Vector u = control_action(g.L[t], loop.controller.x_hat);
    diag.stage_cost[i] = stage_cost(loop.plant.x, u, spec.Q, spec.R);
    loop.u_prev = u;

    penalty_sum += diag.error_penalty[i];
    cost_sum += diag.stage_cost[i];
  }
  out.reward = model_->config.reward_mode == RewardMode::error_penalty ? -penalty_sum : -cost_sum;

  stage_ = t + 1;
  out.terminal = terminal();
  for (int i = 0; i < N; ++i) {
    LoopState& loop = loops_[i];
    const Plant& plant = model_->plants[i];
    const SubsystemSpec& spec = plant.spec();
    loop.plant = plant.step(loop.plant, loop.u_prev, loop.rng);
    if (out.terminal) diag.terminal_cost[i] = terminal_cost(loop.plant.x, spec.Qf);
    loop.sensor = kf1_predict(spec, loop.sensor, loop.u_prev);
    loop.sensor = kf1_update(spec, loop.sensor, plant.measure(loop.plant, loop.rng));
    loop.controller = kf2_advance(spec, loop.controller, loop.u_prev);
  }
  observe();
  out.next_obs = obs_;
  return out;
}

std::vector<double> allocation_fractions(const EpisodeLog& log, int subsystems) {
  require(!log.empty(), "allocation_fractions: empty episode log");
  std::vector<double> counts(subsystems, 0.0);
  for (const auto& rec : log)
    for (int s : rec.subset) {
      require(s >= 1 && s <= subsystems, "allocation_fractions: subsystem index out of range");
      counts[s - 1] += 1.0;
    }
  for (double& c : counts) c /= static_cast<double>(log.size());
  return counts;
}

void write_episode_csv(std::ostream& os, const EpisodeLog& log, int subsystems) {
  os << "stage,action,subset,reward";
  for (int i = 1; i <= subsystems; ++i) os << ",stage_cost_" << i;
  os << '\n';
  for (const auto& rec : log) {
    os << rec.stage << ',' << rec.action << ',';
    for (std::size_t k = 0; k < rec.subset.size(); ++k) os << (k ? " " : "") << rec.subset[k];
    os << ',' << Num{rec.reward};
    for (double c : rec.stage_cost) os << ',' << Num{c};
    os << '\n';
  }
}

EpisodeSummary run_episode(SchedulingEnv& env, const SchedulePolicy& policy,
                           std::uint64_t episode_seed, EpisodeLog* log) {
  const EnvModel& model = env.model();
  EpisodeSummary summary;
  summary.schedule_counts.assign(model.subsystems(), 0);
  summary.stage_losses.reserve(model.horizon());
  Observation obs = env.reset(episode_seed);
  while (!env.terminal()) {
    const ActionIndex a = policy(obs, env.stage());
    StepOutcome out = env.step(a);
    double stage_loss = 0.0;
    for (int i = 0; i < model.subsystems(); ++i) {
      stage_loss += out.diagnostics.stage_cost[i];
      summary.error_term += out.diagnostics.error_penalty[i];
      summary.total_loss += out.diagnostics.stage_cost[i] + out.diagnostics.terminal_cost[i];
    }
    summary.stage_losses.push_back(stage_loss);
    summary.episode_return += out.reward;
    for (int s : out.scheduled) ++summary.schedule_counts[s - 1];
    if (log != nullptr)
      log->push_back(EpisodeRecord{out.stage, a, out.scheduled, out.reward,
                                   out.diagnostics.stage_cost});
    obs = std::move(out.next_obs);
  }
  return summary;
}

}  // namespace deepcas
