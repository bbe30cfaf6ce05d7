#pragma once

#include <string>

#include "deepcas/config.hpp"
#include "deepcas/plant.hpp"
#include "deepcas/scheduling_env.hpp"

namespace deepcas::test {

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// a x + b u, y = c x; all weights 1.
inline SubsystemSpec scalar_spec(double a, double w, double v, double x0_var, double x0_mean = 0.0,
                                 double b = 1.0) {
  SubsystemSpec s;
  s.name = "scalar";
  s.A = scalar(a);
  s.B = scalar(b);
  s.C = scalar(1.0);
  s.W = scalar(w);
  s.V = scalar(v);
  s.x0_mean = vec({x0_mean});
  s.X0 = scalar(x0_var);
  s.Q = scalar(1.0);
  s.R = scalar(1.0);
  s.Qf = scalar(1.0);
  return s;
}

inline std::string config_path(const std::string& name) {
  return std::string(DEEPCAS_CONFIG_DIR) + "/" + name;
}

inline ExperimentConfig benchmark_config(const std::string& name = "exp1_n3m1.json") {
  return load_experiment_config(config_path(name));
}

// Benchmark shrunk for fast training tests.
inline ExperimentConfig small_training_config(int horizon = 60, int epochs = 3) {
  ExperimentConfig cfg = load_experiment_config(
      config_path("exp1_n3m1.json"),
      {"env.horizon=" + std::to_string(horizon), "epochs=" + std::to_string(epochs),
       "dqn.hidden_units=16", "dqn.warmup=40", "dqn.batch_size=8", "dqn.replay_capacity=100",
       "threads=1", "monte_carlo_runs=2"});
  return cfg;
}

}  // namespace deepcas::test
