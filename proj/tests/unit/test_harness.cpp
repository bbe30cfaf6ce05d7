#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "deepcas/errors.hpp"
#include "deepcas/training.hpp"
#include "fixtures.hpp"

using namespace deepcas;
using namespace deepcas::test;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("deepcas_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("config errors name the offending field") {
  try {
    load_experiment_config(config_path("exp1_n3m1.json"), {"dqn.gamma=1.5"});
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "/dqn/gamma");
  }
  CHECK_THROWS_AS(load_experiment_config(config_path("exp1_n3m1.json"), {"env.channels=0"}),
                  ConfigError);
  CHECK_THROWS_AS(load_experiment_config("missing.json"), ConfigError);
  try {
    load_experiment_config(config_path("exp1_n3m1.json"), {"dqn.huber_delta=-1"});
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "/dqn/huber_delta");
  }
}

TEST_CASE("overrides reach the parsed config") {
  const ExperimentConfig cfg = load_experiment_config(
      config_path("exp1_n3m1.json"), {"epochs=7", "dqn.learning_rate=0.01", "name=renamed"});
  CHECK(cfg.epochs == 7);
  CHECK(cfg.dqn.learning_rate == 0.01);
  CHECK(cfg.name == "renamed");
  CHECK(cfg.env.specs.size() == 3);
  CHECK(cfg.env.horizon == 500);
  CHECK(cfg.dqn.replay_capacity == 20000);
}

TEST_CASE("matrix literals") {
  CHECK(parse_matrix(nlohmann::json(2.5), "x") == scalar(2.5));
  CHECK(parse_matrix(nlohmann::json::parse("[1, 2]"), "x") == mat({{1.0, 2.0}}));
  CHECK(parse_matrix(nlohmann::json::parse("[[1, 2], [3, 4]]"), "x") == mat({{1, 2}, {3, 4}}));
  CHECK_THROWS_AS(parse_matrix(nlohmann::json::parse("[[1, 2], [3]]"), "x"), ConfigError);
  const Matrix m = mat({{1, 2}, {3, 4}});
  CHECK(parse_matrix(matrix_to_json(m), "x") == m);
}

TEST_CASE("config hash tracks content") {
  const ExperimentConfig a = benchmark_config();
  const ExperimentConfig b = benchmark_config();
  const ExperimentConfig c = load_experiment_config(config_path("exp1_n3m1.json"), {"epochs=3"});
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("learning rate schedule") {
  DqnConfig d;
  CHECK(learning_rate_at(d, 0, 0) == 1e-4);
  CHECK(learning_rate_at(d, 1000, 5) == doctest::Approx(5e-5));
  d.lr_decay_mode = LrDecayMode::none;
  CHECK(learning_rate_at(d, 1000, 5) == 1e-4);
}

TEST_CASE("seed rule") {
  CHECK(run_seed(1, 0) != run_seed(1, 1));
  CHECK(run_seed(1, 0) != run_seed(2, 0));
  CHECK(episode_seed(run_seed(1, 0), 3) == episode_seed(run_seed(1, 0), 3));
  CHECK(episode_seed(run_seed(1, 0), 3) != episode_seed(run_seed(1, 0), 4));
}

TEST_CASE("single epoch writes one row and fills the buffer by the horizon") {
  ExperimentConfig cfg = small_training_config(500, 1);
  cfg.dqn.replay_capacity = 20000;
  cfg.dqn.warmup = 1000;
  const fs::path dir = scratch("one_epoch");
  const TrainingOutputs out = run_training(cfg, dir.string());
  REQUIRE(out.metrics.size() == 1);
  CHECK(out.metrics[0].replay_size == 500);
  CHECK(out.metrics[0].updates == 0);
  CHECK(out.metrics[0].epsilon == 1.0);
  const std::string csv = slurp(out.metrics_csv);
  CHECK(line_count(csv) == 2);
  CHECK(csv.rfind("epoch,total_loss,episode_return,epsilon,learning_rate,", 0) == 0);
  CHECK(fs::exists(out.final_checkpoint));
  CHECK(fs::exists(out.manifest));
  fs::remove_all(dir);
}

TEST_CASE("training artifacts are byte-identical across repeats") {
  const ExperimentConfig cfg = small_training_config(60, 3);
  const fs::path a = scratch("repeat_a"), b = scratch("repeat_b");
  const TrainingOutputs oa = run_training(cfg, a.string());
  const TrainingOutputs ob = run_training(cfg, b.string());
  CHECK(slurp(oa.metrics_csv) == slurp(ob.metrics_csv));
  CHECK(slurp(oa.final_checkpoint) == slurp(ob.final_checkpoint));
  CHECK(slurp(oa.manifest) == slurp(ob.manifest));
  CHECK(oa.metrics.back().updates > 0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("resume from checkpoint is bit-exact") {
  const ExperimentConfig cfg = small_training_config(60, 3);
  auto model = make_env_model(cfg.env);
  const std::uint64_t seed = run_seed(cfg.master_seed, 0);

  Trainer straight(cfg, model, seed);
  for (int e = 0; e < 3; ++e) straight.run_epoch();

  Trainer first(cfg, model, seed);
  first.run_epoch();
  first.run_epoch();
  const fs::path dir = scratch("resume");
  const std::string path = (dir / "mid.ckpt").string();
  save_checkpoint(path, first.state());
  const TrainerState loaded = load_checkpoint(path);
  CHECK(loaded == first.state());
  Trainer resumed(cfg, model, loaded);
  CHECK(resumed.epoch() == 2);
  resumed.run_epoch();
  CHECK(resumed.state() == straight.state());
  fs::remove_all(dir);
}

TEST_CASE("resume through run_training reproduces the uninterrupted csv tail") {
  ExperimentConfig cfg = small_training_config(60, 4);
  cfg.checkpoint_interval = 2;
  const fs::path full = scratch("resume_full"), part = scratch("resume_part");
  const TrainingOutputs of = run_training(cfg, full.string());
  REQUIRE(fs::exists(full / "checkpoint_epoch_0002.ckpt"));
  const TrainingOutputs op =
      run_training(cfg, part.string(), (full / "checkpoint_epoch_0002.ckpt").string());
  CHECK(slurp(of.final_checkpoint) == slurp(op.final_checkpoint));
  REQUIRE(op.metrics.size() == 2);
  CHECK(op.metrics[1].total_loss == of.metrics[3].total_loss);
  fs::remove_all(full);
  fs::remove_all(part);
}

TEST_CASE("checkpoint shape mismatch is rejected") {
  const ExperimentConfig small = small_training_config(60, 1);
  Trainer t(small, make_env_model(small.env), 9);
  const fs::path dir = scratch("incompatible");
  const std::string path = (dir / "n3.ckpt").string();
  save_checkpoint(path, t.state());

  ExperimentConfig six = load_experiment_config(config_path("exp2_n6m3.json"),
                                                {"dqn.hidden_units=16", "env.horizon=10"});
  CHECK_THROWS_AS(evaluate_policy(path, six, 1), IncompatibleCheckpoint);
  ExperimentConfig wider = small;
  wider.dqn.hidden_units = 32;
  CHECK_THROWS_AS(Trainer(wider, make_env_model(wider.env), load_checkpoint(path)),
                  IncompatibleCheckpoint);

  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  CHECK_THROWS(load_checkpoint((dir / "junk.ckpt").string()));
  fs::remove_all(dir);
}

TEST_CASE("untrained greedy evaluation") {
  const ExperimentConfig cfg = small_training_config(40, 1);
  auto model = make_env_model(cfg.env);
  RandomSource rng(3);
  const QNetwork net = QNetwork::random_init(6, 16, 3, rng);
  const EvaluationResult r = evaluate_policy(net, cfg, model, 20);
  CHECK(r.runs == 20);
  CHECK(std::isfinite(r.mean_loss));
  double sum = 0.0;
  for (double a : r.allocation) sum += a;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(evaluate_policy(net, cfg, model, 20).mean_loss == r.mean_loss);
}

TEST_CASE("Monte Carlo reduction") {
  ExperimentConfig cfg = small_training_config(40, 2);
  cfg.monte_carlo_runs = 1;
  const MonteCarloResult one = run_monte_carlo(cfg);
  REQUIRE(one.curve.size() == 2);
  CHECK(one.curve[0].stderr_total_loss == 0.0);
  CHECK(one.curve[1].mean_total_loss == one.runs[0][1].total_loss);

  cfg.monte_carlo_runs = 3;
  const MonteCarloResult three = run_monte_carlo(cfg);
  const double mean = (three.runs[0][0].total_loss + three.runs[1][0].total_loss +
                       three.runs[2][0].total_loss) / 3.0;
  CHECK(three.curve[0].mean_total_loss == doctest::Approx(mean).epsilon(1e-14));
  CHECK(three.runs[0][0].total_loss == one.runs[0][0].total_loss);

  cfg.threads = 3;
  CHECK(run_monte_carlo(cfg).curve[1].mean_total_loss == three.curve[1].mean_total_loss);

  cfg.master_seed = 2;
  const MonteCarloResult other = run_monte_carlo(cfg);
  CHECK(other.curve[0].mean_total_loss != three.curve[0].mean_total_loss);

  std::ostringstream a, b;
  write_curve_csv(a, three.curve, 3);
  write_curve_csv(b, other.curve, 3);
  CHECK(a.str().substr(0, a.str().find('\n')) == b.str().substr(0, b.str().find('\n')));
  CHECK(a.str().rfind("epoch,mean_total_loss,stderr_total_loss,mean_return,mean_alloc_1", 0) == 0);
}

TEST_CASE("stability diagnostic") {
  const std::vector<double> flat(400, 3.0);
  const StabilityReport f = stability_diagnostic(flat);
  CHECK_FALSE(f.nonstationary);
  for (double v : f.running_average) CHECK(v == doctest::Approx(3.0));

  std::vector<double> ramp(500);
  for (int t = 0; t < 500; ++t) ramp[t] = t + 1.0;
  const StabilityReport r = stability_diagnostic(ramp);
  CHECK(r.nonstationary);
  CHECK(r.running_average[499] == doctest::Approx(250.5));

  RandomSource rng(11);
  std::vector<double> iid(10000);
  for (double& x : iid) x = std::abs(rng.normal());
  CHECK_FALSE(stability_diagnostic(iid).nonstationary);

  CHECK_FALSE(stability_diagnostic(std::vector<double>{}).nonstationary);
}

TEST_CASE("replay fill is monotone across epochs") {
  const ExperimentConfig cfg = small_training_config(60, 4);
  auto model = make_env_model(cfg.env);
  const std::vector<EpochMetrics> m = train_run(cfg, model, 0);
  REQUIRE(m.size() == 4);
  for (std::size_t e = 1; e < m.size(); ++e) {
    CHECK(m[e].replay_size >= m[e - 1].replay_size);
    CHECK(m[e].replay_size <= cfg.dqn.replay_capacity);
    CHECK(m[e].epsilon < m[e - 1].epsilon);
  }
  CHECK(m.back().replay_size == 100);
}

TEST_CASE("divergent update aborts and keeps the last good checkpoint") {
  ExperimentConfig cfg = small_training_config(60, 3);
  cfg.dqn.learning_rate = 1e200;
  const fs::path dir = scratch("diverge");
  CHECK_THROWS_AS(run_training(cfg, dir.string()), TrainingFailure);
  CHECK(fs::exists(dir / "checkpoint_last_good.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("command line training is reproducible") {
  const fs::path a = scratch("cli_a"), b = scratch("cli_b");
  const std::string base = std::string(DEEPCAS_CLI) + " train " + config_path("exp1_n3m1.json") +
                           " --epochs 2 --threads 1 --set env.horizon=50 --set dqn.hidden_units=16"
                           " --set dqn.warmup=40 --out ";
  REQUIRE(std::system((base + a.string() + " > /dev/null").c_str()) == 0);
  REQUIRE(std::system((base + b.string() + " > /dev/null").c_str()) == 0);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "checkpoint_final.ckpt") == slurp(b / "checkpoint_final.ckpt"));
  CHECK(std::system((std::string(DEEPCAS_CLI) + " train " + config_path("exp1_n3m1.json") +
                     " --set dqn.gamma=2 --out " + a.string() + " 2> /dev/null").c_str()) != 0);
  fs::remove_all(a);
  fs::remove_all(b);
}

}  // TEST_SUITE
