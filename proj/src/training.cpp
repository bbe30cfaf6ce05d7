#include "deepcas/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "deepcas/csv.hpp"
#include "deepcas/errors.hpp"
#include "deepcas/kernels/kernels.hpp"
#include "deepcas/parallel.hpp"
#include "json.hpp"

namespace deepcas {

namespace fs = std::filesystem;

StabilityReport stability_diagnostic(std::span<const double> losses, double factor) {
  StabilityReport rep;
  rep.running_average.reserve(losses.size());
  double sum = 0.0;
  for (std::size_t n = 0; n < losses.size(); ++n) {
    sum += losses[n];
    rep.running_average.push_back(sum / static_cast<double>(n + 1));
  }
  if (losses.size() < 4) return rep;
  const std::size_t mid = losses.size() / 2;
  rep.midpoint_average = rep.running_average[mid - 1];
  const std::size_t q3 = losses.size() - losses.size() / 4;
  double tail = 0.0;
  for (std::size_t n = q3; n < losses.size(); ++n) tail += losses[n];
  rep.last_quartile_mean = tail / static_cast<double>(losses.size() - q3);
  rep.nonstationary =
      rep.last_quartile_mean > factor * rep.midpoint_average && rep.last_quartile_mean > 0.0;
  return rep;
}

std::uint64_t run_seed(std::uint64_t master_seed, int run_index) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(run_index), tag(StreamTag::run));
}

std::uint64_t episode_seed(std::uint64_t run_seed, int epoch) {
  return derive_seed(run_seed, static_cast<std::uint64_t>(epoch), tag(StreamTag::episode));
}

namespace {

TrainerState fresh_state(const DqnConfig& dqn, const EnvModel& model, std::uint64_t seed) {
  TrainerState s;
  RandomSource init_rng(derive_seed(seed, tag(StreamTag::network_init)));
  s.net = QNetwork::random_init(model.observation_dim, dqn.hidden_units, model.action_count,
                                init_rng);
  s.adam = AdamState::for_network(s.net, dqn.learning_rate);
  s.adam.beta1 = dqn.adam_beta1;
  s.adam.beta2 = dqn.adam_beta2;
  s.adam.epsilon = dqn.adam_epsilon;
  s.buffer = ReplayBuffer(dqn.replay_capacity);
  s.agent_rng = RandomSource(derive_seed(seed, tag(StreamTag::agent)));
  s.epoch = 0;
  s.run_seed = seed;
  s.subsystems = model.subsystems();
  s.channels = model.channels();
  return s;
}

}  // namespace

Trainer::Trainer(const ExperimentConfig& cfg, std::shared_ptr<const EnvModel> model,
                 std::uint64_t seed)
    : Trainer(cfg, model, fresh_state(cfg.dqn, *model, seed)) {}

Trainer::Trainer(const ExperimentConfig& cfg, std::shared_ptr<const EnvModel> model,
                 TrainerState state)
    : dqn_(cfg.dqn),
      stability_factor_(cfg.stability_factor),
      model_(std::move(model)),
      env_(model_),
      state_(std::move(state)) {
  check_compatible(state_, *model_);
  if (state_.net.hidden() != dqn_.hidden_units)
    throw IncompatibleCheckpoint("checkpoint hidden layer has " +
                                 std::to_string(state_.net.hidden()) + " units, config asks for " +
                                 std::to_string(dqn_.hidden_units));
}

EpochMetrics Trainer::run_epoch() {
  const int e = state_.epoch;
  const int N = model_->subsystems();
  EpochMetrics m;
  m.epoch = e;
  m.epsilon = epsilon_schedule(e, dqn_.epsilon_rate, dqn_.epsilon_floor);
  m.allocation.assign(N, 0.0);

  const std::size_t ready = std::max(dqn_.warmup, dqn_.batch_size);
  std::vector<double> stage_losses;
  stage_losses.reserve(model_->horizon());
  double td_loss_sum = 0.0;

  Observation obs = env_.reset(episode_seed(state_.run_seed, e));
  while (!env_.terminal()) {
    const ActionIndex a = select_action(state_.net, obs, m.epsilon, state_.agent_rng);
    StepOutcome out = env_.step(a);

    double stage_loss = 0.0;
    for (int i = 0; i < N; ++i) {
      stage_loss += out.diagnostics.stage_cost[i];
      m.total_loss += out.diagnostics.stage_cost[i] + out.diagnostics.terminal_cost[i];
    }
    stage_losses.push_back(stage_loss);
    m.episode_return += out.reward;
    for (int s : out.scheduled) m.allocation[s - 1] += 1.0;

    state_.buffer.push(Transition{std::move(obs), a, out.reward, out.next_obs, out.terminal});
    if (state_.buffer.size() >= ready) {
      state_.adam.learning_rate = learning_rate_at(dqn_, e, state_.adam.step);
      m.learning_rate = state_.adam.learning_rate;
      auto batch = state_.buffer.sample_minibatch(dqn_.batch_size, state_.agent_rng);
      td_loss_sum += minibatch_step(state_.net, state_.adam, *batch, dqn_.gamma, dqn_.huber_delta);
      ++m.updates;
    }
    obs = std::move(out.next_obs);
  }

  if (m.updates == 0) m.learning_rate = learning_rate_at(dqn_, e, state_.adam.step);
  m.mean_td_loss = m.updates > 0 ? td_loss_sum / static_cast<double>(m.updates) : 0.0;
  m.replay_size = state_.buffer.size();
  for (double& a : m.allocation) a /= static_cast<double>(model_->horizon());
  const StabilityReport rep = stability_diagnostic(stage_losses, stability_factor_);
  m.running_avg_stage_loss = rep.running_average.empty() ? 0.0 : rep.running_average.back();
  m.nonstationary = rep.nonstationary;
  ++state_.epoch;
  return m;
}

void write_metrics_header(std::ostream& os, int subsystems) {
  os << "epoch,total_loss,episode_return,epsilon,learning_rate,mean_td_loss,updates,replay_size,"
        "running_avg_stage_loss,nonstationary";
  for (int i = 1; i <= subsystems; ++i) os << ",alloc_" << i;
  os << '\n';
}

void write_metrics_row(std::ostream& os, const EpochMetrics& m) {
  os << m.epoch << ',' << Num{m.total_loss} << ',' << Num{m.episode_return} << ','
     << Num{m.epsilon} << ',' << Num{m.learning_rate} << ',' << Num{m.mean_td_loss} << ','
     << m.updates << ',' << m.replay_size << ',' << Num{m.running_avg_stage_loss} << ','
     << (m.nonstationary ? 1 : 0);
  for (double a : m.allocation) os << ',' << Num{a};
  os << '\n';
}

std::string manifest_json(const ExperimentConfig& cfg, const std::string& command) {
  nlohmann::json j = {
      {"tool", "deepcas"},
      {"version", "1.0.0"},
      {"command", command},
      {"experiment", cfg.name},
      {"config_hash", hex64(config_hash(cfg))},
      {"master_seed", cfg.master_seed},
      {"simd_level", std::string(kernels::level_name(kernels::active_level()))},
      {"csv_schema", {{"metrics", 1}, {"curve", 1}, {"search", 1}}},
      {"seed_rule",
       "run_seed = derive_seed(master_seed, run, 1); episode_seed = derive_seed(run_seed, epoch, "
       "4); noise stream = derive_seed(episode_seed, subsystem, 5)"},
      {"config", cfg.source},
  };
  return j.dump(2) + "\n";
}

TrainingOutputs run_training(const ExperimentConfig& cfg, const std::string& out_dir,
                             const std::string& resume_from) {
  fs::create_directories(out_dir);
  auto model = make_env_model(cfg.env);

  TrainingOutputs out;
  out.metrics_csv = (fs::path(out_dir) / "metrics.csv").string();
  out.final_checkpoint = (fs::path(out_dir) / "checkpoint_final.ckpt").string();
  out.manifest = (fs::path(out_dir) / "manifest.json").string();

  std::unique_ptr<Trainer> trainer;
  if (resume_from.empty()) {
    trainer = std::make_unique<Trainer>(cfg, model, run_seed(cfg.master_seed, 0));
  } else {
    trainer = std::make_unique<Trainer>(cfg, model, load_checkpoint(resume_from));
  }

  {
    std::ofstream manifest(out.manifest);
    manifest << manifest_json(cfg, resume_from.empty() ? "train" : "train --resume");
  }

  std::ofstream csv(out.metrics_csv);
  if (!csv) throw std::runtime_error("cannot write '" + out.metrics_csv + "'");
  write_metrics_header(csv, model->subsystems());

  while (trainer->epoch() < cfg.epochs) {
    TrainerState last_good = trainer->state();
    EpochMetrics m;
    try {
      m = trainer->run_epoch();
    } catch (const TrainingFailure&) {
      save_checkpoint((fs::path(out_dir) / "checkpoint_last_good.ckpt").string(), last_good);
      throw;
    }
    write_metrics_row(csv, m);
    csv.flush();
    out.metrics.push_back(std::move(m));
    if (cfg.checkpoint_interval > 0 && trainer->epoch() % cfg.checkpoint_interval == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.ckpt", trainer->epoch());
      save_checkpoint((fs::path(out_dir) / name).string(), trainer->state());
    }
  }
  save_checkpoint(out.final_checkpoint, trainer->state());
  return out;
}

std::vector<EpochMetrics> train_run(const ExperimentConfig& cfg,
                                    std::shared_ptr<const EnvModel> model, int run_index,
                                    TrainerState* final_state) {
  Trainer trainer(cfg, model, run_seed(cfg.master_seed, run_index));
  std::vector<EpochMetrics> metrics;
  metrics.reserve(cfg.epochs);
  while (trainer.epoch() < cfg.epochs) metrics.push_back(trainer.run_epoch());
  if (final_state != nullptr) *final_state = trainer.state();
  return metrics;
}

MonteCarloResult run_monte_carlo(const ExperimentConfig& cfg, bool keep_states) {
  auto model = make_env_model(cfg.env);
  const int R = cfg.monte_carlo_runs;
  MonteCarloResult res;
  res.runs.resize(R);
  if (keep_states) res.final_states.resize(R);
  parallel_for(static_cast<std::size_t>(R), cfg.threads, [&](std::size_t k) {
    res.runs[k] = train_run(cfg, model, static_cast<int>(k),
                            keep_states ? &res.final_states[k] : nullptr);
  });

  const int N = model->subsystems();
  for (int e = 0; e < cfg.epochs; ++e) {
    CurvePoint p;
    p.epoch = e;
    p.mean_allocation.assign(N, 0.0);
    for (const auto& run : res.runs) {
      p.mean_total_loss += run[e].total_loss;
      p.mean_return += run[e].episode_return;
      for (int i = 0; i < N; ++i) p.mean_allocation[i] += run[e].allocation[i];
    }
    p.mean_total_loss /= R;
    p.mean_return /= R;
    for (double& a : p.mean_allocation) a /= R;
    if (R > 1) {
      double ss = 0.0;
      for (const auto& run : res.runs) ss += std::pow(run[e].total_loss - p.mean_total_loss, 2);
      p.stderr_total_loss = std::sqrt(ss / (R - 1) / R);
    }
    res.curve.push_back(std::move(p));
  }
  return res;
}

void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& curve, int subsystems) {
  os << "epoch,mean_total_loss,stderr_total_loss,mean_return";
  for (int i = 1; i <= subsystems; ++i) os << ",mean_alloc_" << i;
  os << '\n';
  for (const auto& p : curve) {
    os << p.epoch << ',' << Num{p.mean_total_loss} << ',' << Num{p.stderr_total_loss} << ','
       << Num{p.mean_return};
    for (double a : p.mean_allocation) os << ',' << Num{a};
    os << '\n';
  }
}

EvaluationResult evaluate_policy(const QNetwork& net, const ExperimentConfig& cfg,
                                 std::shared_ptr<const EnvModel> model, int runs) {
  require(runs >= 1, "evaluate_policy: need at least one run");
  if (net.inputs() != model->observation_dim || net.actions() != model->action_count)
    throw IncompatibleCheckpoint("network shape does not match the environment");
  std::vector<EpisodeSummary> results(runs);
  parallel_for(static_cast<std::size_t>(runs), cfg.threads, [&](std::size_t k) {
    SchedulingEnv env(model);
    SchedulePolicy greedy = [&net](const Observation& obs, int) {
      return argmax(forward(net, obs));
    };
    results[k] = run_episode(env, greedy,
                             derive_seed(cfg.master_seed, k, tag(StreamTag::evaluation)));
  });
  const int N = model->subsystems();
  EvaluationResult r;
  r.runs = runs;
  r.allocation.assign(N, 0.0);
  for (const auto& s : results) {
    r.mean_loss += s.total_loss;
    for (int i = 0; i < N; ++i) r.allocation[i] += s.schedule_counts[i];
  }
  r.mean_loss /= runs;
  if (runs > 1) {
    double ss = 0.0;
    for (const auto& s : results) ss += std::pow(s.total_loss - r.mean_loss, 2);
    r.stderr_loss = std::sqrt(ss / (runs - 1) / runs);
  }
  for (double& a : r.allocation) a /= static_cast<double>(runs) * model->horizon();
  return r;
}

EvaluationResult evaluate_policy(const std::string& checkpoint, const ExperimentConfig& cfg,
                                 int runs) {
  const TrainerState state = load_checkpoint(checkpoint);
  auto model = make_env_model(cfg.env);
  check_compatible(state, *model);
  return evaluate_policy(state.net, cfg, model, runs);
}

}  // namespace deepcas
