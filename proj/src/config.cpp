#include "deepcas/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "deepcas/errors.hpp"

namespace deepcas {

using nlohmann::json;

namespace {

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& obj, const char* key, const std::string& path, double fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_number()) throw ConfigError(path + "/" + key, "expected a number");
  return v->get<double>();
}

long long get_integer(const json& obj, const char* key, const std::string& path,
                      long long fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_number_integer()) throw ConfigError(path + "/" + key, "expected an integer");
  return v->get<long long>();
}

std::string get_string(const json& obj, const char* key, const std::string& path,
                       const std::string& fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) throw ConfigError(path + "/" + key, "expected a string");
  return v->get<std::string>();
}

std::size_t get_count(const json& obj, const char* key, const std::string& path,
                      std::size_t fallback) {
  const long long v = get_integer(obj, key, path, static_cast<long long>(fallback));
  if (v < 1) throw ConfigError(path + "/" + key, "must be a positive integer");
  return static_cast<std::size_t>(v);
}

Vector parse_vector(const json& j, const std::string& field) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(field, "expected a number array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field + "/" + std::to_string(i), "expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

SubsystemSpec parse_subsystem(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  SubsystemSpec s;
  s.name = get_string(j, "name", path, "");
  auto matrix = [&](const char* key) -> Matrix {
    const json* v = find(j, key);
    if (v == nullptr) throw ConfigError(path + "/" + key, "missing");
    return parse_matrix(*v, path + "/" + key);
  };
  s.A = matrix("A");
  s.B = matrix("B");
  s.C = matrix("C");
  s.W = matrix("W");
  s.V = matrix("V");
  s.X0 = matrix("X0");
  s.Q = matrix("Q");
  s.R = matrix("R");
  s.Qf = matrix("Qf");
  const json* mean = find(j, "x0_mean");
  if (mean == nullptr) throw ConfigError(path + "/x0_mean", "missing");
  s.x0_mean = parse_vector(*mean, path + "/x0_mean");
  try {
    validate(s);
  } catch (const SpecificationError& e) {
    throw ConfigError(path, e.what());
  }
  return s;
}

EnvConfig parse_env(const json& j) {
  const std::string path = "/env";
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  EnvConfig env;
  env.channels = static_cast<int>(get_integer(j, "channels", path, 1));
  env.horizon = static_cast<int>(get_integer(j, "horizon", path, 500));
  const std::string mode = get_string(j, "reward_mode", path, "error_penalty");
  try {
    env.reward_mode = parse_reward_mode(mode);
  } catch (const SpecificationError& e) {
    throw ConfigError(path + "/reward_mode", e.what());
  }
  const json* subs = find(j, "subsystems");
  if (subs == nullptr || !subs->is_array() || subs->empty())
    throw ConfigError(path + "/subsystems", "expected a non-empty array");
  for (std::size_t i = 0; i < subs->size(); ++i)
    env.specs.push_back(parse_subsystem((*subs)[i], path + "/subsystems/" + std::to_string(i)));

  if (env.horizon < 1) throw ConfigError(path + "/horizon", "must be at least 1");
  if (env.channels < 1 || env.channels >= env.subsystems())
    throw ConfigError(path + "/channels", "need 1 <= channels < number of subsystems");
  return env;
}

LrDecayMode parse_decay_mode(const std::string& s, const std::string& field) {
  if (s == "per_epoch") return LrDecayMode::per_epoch;
  if (s == "per_step") return LrDecayMode::per_step;
  if (s == "none") return LrDecayMode::none;
  throw ConfigError(field, "expected one of per_epoch, per_step, none");
}

DqnConfig parse_dqn(const json& j) {
  const std::string path = "/dqn";
  DqnConfig d;
  if (j.is_null()) return d;
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  d.gamma = get_number(j, "gamma", path, d.gamma);
  d.learning_rate = get_number(j, "learning_rate", path, d.learning_rate);
  d.lr_decay = get_number(j, "lr_decay", path, d.lr_decay);
  d.lr_decay_mode =
      parse_decay_mode(get_string(j, "lr_decay_mode", path, "per_epoch"), path + "/lr_decay_mode");
  d.hidden_units = get_count(j, "hidden_units", path, d.hidden_units);
  d.replay_capacity = get_count(j, "replay_capacity", path, d.replay_capacity);
  d.batch_size = get_count(j, "batch_size", path, d.batch_size);
  d.warmup =
      static_cast<std::size_t>(get_integer(j, "warmup", path, static_cast<long long>(d.warmup)));
  d.epsilon_rate = get_number(j, "epsilon_rate", path, d.epsilon_rate);
  d.epsilon_floor = get_number(j, "epsilon_floor", path, d.epsilon_floor);
  d.adam_beta1 = get_number(j, "adam_beta1", path, d.adam_beta1);
  d.adam_beta2 = get_number(j, "adam_beta2", path, d.adam_beta2);
  d.adam_epsilon = get_number(j, "adam_epsilon", path, d.adam_epsilon);
  d.huber_delta = get_number(j, "huber_delta", path, d.huber_delta);

  if (!(d.gamma > 0.0 && d.gamma < 1.0)) throw ConfigError(path + "/gamma", "must lie in (0, 1)");
  if (!(d.learning_rate > 0.0)) throw ConfigError(path + "/learning_rate", "must be positive");
  if (!(d.lr_decay >= 0.0)) throw ConfigError(path + "/lr_decay", "must be nonnegative");
  if (!(d.epsilon_rate > 0.0 && d.epsilon_rate <= 1.0))
    throw ConfigError(path + "/epsilon_rate", "must lie in (0, 1]");
  if (!(d.epsilon_floor >= 0.0 && d.epsilon_floor <= 1.0))
    throw ConfigError(path + "/epsilon_floor", "must lie in [0, 1]");
  if (!(d.adam_beta1 >= 0.0 && d.adam_beta1 < 1.0))
    throw ConfigError(path + "/adam_beta1", "must lie in [0, 1)");
  if (!(d.adam_beta2 >= 0.0 && d.adam_beta2 < 1.0))
    throw ConfigError(path + "/adam_beta2", "must lie in [0, 1)");
  if (!(d.adam_epsilon > 0.0)) throw ConfigError(path + "/adam_epsilon", "must be positive");
  if (!(d.huber_delta >= 0.0)) throw ConfigError(path + "/huber_delta", "must be nonnegative");
  if (d.batch_size > d.replay_capacity)
    throw ConfigError(path + "/batch_size", "must not exceed replay_capacity");
  return d;
}

}  // namespace

double learning_rate_at(const DqnConfig& dqn, int epoch, std::uint64_t optimizer_step) {
  switch (dqn.lr_decay_mode) {
    case LrDecayMode::per_epoch:
      return dqn.learning_rate / (1.0 + dqn.lr_decay * epoch);
    case LrDecayMode::per_step:
      return dqn.learning_rate / (1.0 + dqn.lr_decay * static_cast<double>(optimizer_step));
    case LrDecayMode::none:
      break;
  }
  return dqn.learning_rate;
}

Matrix parse_matrix(const json& j, const std::string& field) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(field, "expected a matrix (array of rows)");
  const bool nested = j[0].is_array();
  if (!nested) {
    // A flat array is a single row.
    const Vector row = parse_vector(j, field);
    return row.transpose();
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ConfigError(field + "/" + std::to_string(r), "rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number())
        throw ConfigError(field + "/" + std::to_string(r) + "/" + std::to_string(c),
                          "expected a number");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

ExperimentConfig parse_experiment_config(const json& j) {
  if (!j.is_object()) throw ConfigError("/", "expected a JSON object");
  ExperimentConfig cfg;
  cfg.source = j;
  cfg.name = get_string(j, "name", "", cfg.name);
  const json* env = find(j, "env");
  if (env == nullptr) throw ConfigError("/env", "missing");
  cfg.env = parse_env(*env);
  const json* dqn = find(j, "dqn");
  cfg.dqn = parse_dqn(dqn ? *dqn : json());
  cfg.epochs = static_cast<int>(get_integer(j, "epochs", "", cfg.epochs));
  cfg.monte_carlo_runs =
      static_cast<int>(get_integer(j, "monte_carlo_runs", "", cfg.monte_carlo_runs));
  const json* seed = find(j, "master_seed");
  if (seed != nullptr) {
    if (!seed->is_number_unsigned() && !seed->is_number_integer())
      throw ConfigError("/master_seed", "expected a nonnegative integer");
    if (seed->is_number_integer() && seed->get<long long>() < 0)
      throw ConfigError("/master_seed", "expected a nonnegative integer");
    cfg.master_seed = seed->get<std::uint64_t>();
  }
  cfg.checkpoint_interval =
      static_cast<int>(get_integer(j, "checkpoint_interval", "", cfg.checkpoint_interval));
  cfg.eval_runs = static_cast<int>(get_integer(j, "eval_runs", "", cfg.eval_runs));
  cfg.threads = static_cast<int>(get_integer(j, "threads", "", cfg.threads));
  cfg.stability_factor = get_number(j, "stability_factor", "", cfg.stability_factor);
  cfg.output_dir = get_string(j, "output_dir", "", cfg.output_dir);

  if (cfg.epochs < 1) throw ConfigError("/epochs", "must be at least 1");
  if (cfg.monte_carlo_runs < 1) throw ConfigError("/monte_carlo_runs", "must be at least 1");
  if (cfg.checkpoint_interval < 0) throw ConfigError("/checkpoint_interval", "must be nonnegative");
  if (cfg.eval_runs < 1) throw ConfigError("/eval_runs", "must be at least 1");
  if (cfg.threads < 0) throw ConfigError("/threads", "must be nonnegative");
  if (!(cfg.stability_factor > 0.0)) throw ConfigError("/stability_factor", "must be positive");
  return cfg;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError(assignment, "override must look like path.to.field=value");
  std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  std::string pointer = "/";
  for (char c : key) pointer += (c == '.') ? '/' : c;
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  try {
    j[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    throw ConfigError(pointer, std::string("cannot apply override: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  return parse_experiment_config(j);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = cfg.source.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::string resolve_output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("DEEPCAS_OUTPUT_DIR"); env != nullptr && *env != '\0')
    return env;
  return cfg.output_dir;
}

}  // namespace deepcas
