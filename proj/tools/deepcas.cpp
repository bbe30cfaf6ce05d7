#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "deepcas/baselines.hpp"
#include "deepcas/config.hpp"
#include "deepcas/errors.hpp"
#include "deepcas/training.hpp"

namespace fs = std::filesystem;
using namespace deepcas;

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  int epochs = 0;
  std::string out;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("config", a.config, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", a.overrides, "override a config field, e.g. dqn.gamma=0.9");
  cmd->add_option("--seed", a.seed, "master seed");
  cmd->add_option("--epochs", a.epochs, "number of training epochs");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--threads", a.threads, "worker threads (0 = all cores)");
}

ExperimentConfig load(const CommonArgs& a) {
  std::vector<std::string> ov = a.overrides;
  if (a.seed >= 0) ov.push_back("master_seed=" + std::to_string(a.seed));
  if (a.epochs > 0) ov.push_back("epochs=" + std::to_string(a.epochs));
  if (a.threads >= 0) ov.push_back("threads=" + std::to_string(a.threads));
  return load_experiment_config(a.config, ov);
}

std::string output_dir(const CommonArgs& a, const ExperimentConfig& cfg) {
  return a.out.empty() ? resolve_output_dir(cfg) : a.out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << text;
}

void print_allocation(const std::vector<double>& alloc) {
  for (std::size_t i = 0; i < alloc.size(); ++i)
    std::printf("%s%.4f", i == 0 ? "" : " ", alloc[i]);
  std::printf("\n");
}

int cmd_train(const CommonArgs& a, const std::string& resume) {
  const ExperimentConfig cfg = load(a);
  const std::string dir = output_dir(a, cfg);
  const TrainingOutputs out = run_training(cfg, dir, resume);
  const EpochMetrics& last = out.metrics.empty() ? EpochMetrics{} : out.metrics.back();
  std::printf("epochs %d  final loss %.6f  epsilon %.4f\n", cfg.epochs, last.total_loss,
              last.epsilon);
  std::printf("metrics    %s\ncheckpoint %s\nmanifest   %s\n", out.metrics_csv.c_str(),
              out.final_checkpoint.c_str(), out.manifest.c_str());
  return 0;
}

int cmd_eval(const CommonArgs& a, const std::string& checkpoint, int runs) {
  const ExperimentConfig cfg = load(a);
  const EvaluationResult r = evaluate_policy(checkpoint, cfg, runs > 0 ? runs : cfg.eval_runs);
  std::printf("runs %d  mean loss %.6f  stderr %.6f\nallocation ", r.runs, r.mean_loss,
              r.stderr_loss);
  print_allocation(r.allocation);
  return 0;
}

int cmd_baseline(const CommonArgs& a, int pmin, int pmax, double budget, int runs) {
  const ExperimentConfig cfg = load(a);
  auto model = make_env_model(cfg.env);
  const SearchResult best = exhaustive_periodic_search(*model, pmin, pmax, budget);
  const double rr =
      expected_schedule_loss(*model, round_robin_schedule(model->subsystems(), model->channels()));
  std::printf("candidates %llu\nbest periodic %s  loss %.6f\nround robin  loss %.6f\n",
              static_cast<unsigned long long>(best.candidates),
              format_schedule(best.schedule).c_str(), best.loss, rr);
  if (runs > 0) {
    const auto greedy = monte_carlo_loss(
        model, [&](std::uint64_t) { return greedy_error_policy(*model); }, runs,
        derive_seed(cfg.master_seed, tag(StreamTag::baseline)), cfg.threads);
    const auto random = monte_carlo_loss(
        model, [&](std::uint64_t s) { return random_policy(*model, s); }, runs,
        derive_seed(cfg.master_seed, tag(StreamTag::baseline)), cfg.threads);
    std::printf("greedy error loss %.6f +- %.6f\nrandom       loss %.6f +- %.6f\n",
                greedy.mean_total_loss, greedy.stderr_total_loss, random.mean_total_loss,
                random.stderr_total_loss);
  }
  const fs::path dir = output_dir(a, cfg);
  fs::create_directories(dir);
  std::ofstream csv(dir / "search.csv");
  write_search_csv(csv, best);
  std::printf("search     %s\n", (dir / "search.csv").string().c_str());
  return 0;
}

int cmd_oracle(const CommonArgs& a, const std::string& schedule_file) {
  const ExperimentConfig cfg = load(a);
  auto model = make_env_model(cfg.env);
  const PeriodicSchedule s = read_schedule_file(schedule_file);
  validate(s, model->subsystems(), model->channels());
  const ScheduleOracle oracle(*model);
  std::printf("schedule %s\nexpected loss %.9f\nerror term %.9f\n", format_schedule(s).c_str(),
              oracle.expected_loss(s), oracle.expected_error_term(s));
  return 0;
}

int cmd_mc(const CommonArgs& a, int runs) {
  CommonArgs b = a;
  if (runs > 0) b.overrides.push_back("monte_carlo_runs=" + std::to_string(runs));
  const ExperimentConfig cfg = load(b);
  const fs::path dir = output_dir(a, cfg);
  fs::create_directories(dir);
  const MonteCarloResult mc = run_monte_carlo(cfg);
  std::ofstream csv(dir / "curve.csv");
  write_curve_csv(csv, mc.curve, cfg.env.subsystems());
  write_file(dir / "manifest.json", manifest_json(cfg, "mc"));
  const CurvePoint& first = mc.curve.front();
  const CurvePoint& last = mc.curve.back();
  std::printf("runs %d  epoch 0 loss %.6f  epoch %d loss %.6f +- %.6f\n", cfg.monte_carlo_runs,
              first.mean_total_loss, last.epoch, last.mean_total_loss, last.stderr_total_loss);
  std::printf("curve      %s\n", (dir / "curve.csv").string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep Q-network scheduling of sensor transmissions in networked control systems"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, base_args, oracle_args, mc_args;
  std::string resume, checkpoint, schedule_file;
  int eval_runs = 0, mc_runs = 0, base_runs = 0, pmin = 2, pmax = 11;
  double budget = 1e7;

  auto* train = app.add_subcommand("train", "train one DQN run");
  add_common(train, train_args);
  train->add_option("--resume", resume, "continue from a checkpoint")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "greedy rollouts of a trained checkpoint");
  add_common(eval, eval_args);
  eval->add_option("checkpoint", checkpoint, "checkpoint file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--runs", eval_runs, "evaluation episodes");

  auto* base = app.add_subcommand("baseline", "exhaustive periodic search and heuristics");
  add_common(base, base_args);
  base->add_option("--pmin", pmin, "smallest period");
  base->add_option("--pmax", pmax, "largest period");
  base->add_option("--budget", budget, "maximum number of candidate schedules");
  base->add_option("--runs", base_runs, "Monte Carlo episodes for greedy and random policies");

  auto* oracle = app.add_subcommand("oracle", "expected loss of a periodic schedule");
  add_common(oracle, oracle_args);
  oracle->add_option("schedule", schedule_file, "schedule file")
      ->required()
      ->check(CLI::ExistingFile);

  auto* mc = app.add_subcommand("mc", "Monte Carlo learning curve over independent runs");
  add_common(mc, mc_args);
  mc->add_option("--runs", mc_runs, "number of runs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_args, resume);
    if (*eval) return cmd_eval(eval_args, checkpoint, eval_runs);
    if (*base) return cmd_baseline(base_args, pmin, pmax, budget, base_runs);
    if (*oracle) return cmd_oracle(oracle_args, schedule_file);
    if (*mc) return cmd_mc(mc_args, mc_runs);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
