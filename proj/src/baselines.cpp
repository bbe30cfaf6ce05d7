#include "deepcas/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "deepcas/csv.hpp"
#include "deepcas/errors.hpp"
#include "deepcas/parallel.hpp"

namespace deepcas {

void validate(const PeriodicSchedule& schedule, int N, int M) {
  require(!schedule.sequence.empty(), "periodic schedule must have at least one entry");
  for (const Subset& s : schedule.sequence) {
    require(static_cast<int>(s.size()) == M,
            "periodic schedule entry must have exactly M elements");
    subset_to_action(s, N);  // range and ordering
  }
}

ScheduleOracle::ScheduleOracle(const EnvModel& model) : model_(model) {
  const int N = model.subsystems();
  baseline_.resize(N);
  innovation_.resize(N);
  for (int i = 0; i < N; ++i) {
    const SubsystemSpec& spec = model.plants[i].spec();
    const FilterCovarianceSequence& kf = model.filter_covariances[i];
    baseline_[i] = closed_form_baseline_loss(spec, model.gains[i], kf);
    baseline_total_ += baseline_[i];
    auto& inn = innovation_[i];
    inn.reserve(model.horizon());
    for (int t = 0; t < model.horizon(); ++t) {
      Matrix M = kf.K[t] * kf.innovation_cov[t] * kf.K[t].transpose();
      inn.push_back(0.5 * (M + M.transpose()));
    }
  }
}

double ScheduleOracle::pattern_cost(int i, int period, std::uint32_t pattern) const {
  return error_cost(i, [&](int t) { return ((pattern >> (t % period)) & 1u) != 0; });
}

double ScheduleOracle::expected_error_term(const PeriodicSchedule& schedule) const {
  validate(schedule, model_.subsystems(), model_.channels());
  double total = 0.0;
  for (int i = 0; i < model_.subsystems(); ++i) {
    std::uint32_t pattern = 0;
    bool periodic_bits = schedule.period() <= 32;
    if (periodic_bits) {
      for (int k = 0; k < schedule.period(); ++k) {
        const Subset& s = schedule.sequence[k];
        if (std::find(s.begin(), s.end(), i + 1) != s.end()) pattern |= (1u << k);
      }
      total += pattern_cost(i, schedule.period(), pattern);
    } else {
      total += error_cost(i, [&](int t) {
        const Subset& s = schedule.at(t);
        return std::find(s.begin(), s.end(), i + 1) != s.end();
      });
    }
  }
  return total;
}

double ScheduleOracle::expected_loss(const PeriodicSchedule& schedule) const {
  return baseline_total_ + expected_error_term(schedule);
}

double expected_schedule_loss(const EnvModel& model, const PeriodicSchedule& schedule) {
  return ScheduleOracle(model).expected_loss(schedule);
}

double periodic_candidate_count(int N, int M, int p_min, int p_max) {
  const double actions = static_cast<double>(binomial(N, M));
  double total = 0.0;
  for (int p = p_min; p <= p_max; ++p) total += std::pow(actions, p);
  return total;
}

SearchResult exhaustive_periodic_search(const EnvModel& model, int p_min, int p_max,
                                        double budget) {
  require(p_min >= 1 && p_max >= p_min, "exhaustive_periodic_search: need 1 <= p_min <= p_max");
  require(p_max <= 31, "exhaustive_periodic_search: period too long");
  const int N = model.subsystems();
  const int M = model.channels();
  const double count = periodic_candidate_count(N, M, p_min, p_max);
  if (count > budget) {
    std::ostringstream msg;
    msg << "periodic search over periods " << p_min << ".." << p_max << " needs " << count
        << " candidate evaluations, budget is " << budget;
    throw BudgetExceeded(msg.str());
  }

  const ScheduleOracle oracle(model);
  const std::size_t A = model.action_count;
  // Bitmask of subsystems in each action.
  std::vector<std::uint32_t> members(A, 0);
  for (std::size_t a = 0; a < A; ++a)
    for (int s : action_to_subset(a, N, M)) members[a] |= 1u << (s - 1);

  SearchResult best;
  best.loss = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_seq;

  for (int p = p_min; p <= p_max; ++p) {
    // Lazily filled cache of per-subsystem costs for each on/off pattern.
    const std::size_t patterns = std::size_t{1} << p;
    std::vector<std::vector<double>> cache(N, std::vector<double>(patterns, -1.0));
    auto cost = [&](int i, std::uint32_t pattern) {
      double& c = cache[i][pattern];
      if (c < 0.0) c = oracle.pattern_cost(i, p, pattern);
      return c;
    };

    std::vector<std::size_t> seq(p, 0);
    while (true) {
      double err = 0.0;
      for (int i = 0; i < N; ++i) {
        std::uint32_t pattern = 0;
        for (int k = 0; k < p; ++k)
          if (members[seq[k]] & (1u << i)) pattern |= 1u << k;
        err += cost(i, pattern);
      }
      const double loss = oracle.baseline_loss() + err;
      ++best.candidates;
      if (loss < best.loss) {
        best.loss = loss;
        best_seq = seq;
      }
      // Odometer increment, last position fastest: lexicographic order.
      int pos = p - 1;
      while (pos >= 0 && ++seq[pos] == A) seq[pos--] = 0;
      if (pos < 0) break;
    }
  }
  for (std::size_t a : best_seq) best.schedule.sequence.push_back(action_to_subset(a, N, M));
  return best;
}

Subset round_robin(int N, int M, int stage) {
  require(N >= 1 && M >= 1 && M <= N && stage >= 0, "round_robin: bad arguments");
  Subset s;
  s.reserve(M);
  const long long start = static_cast<long long>(stage) * M;
  for (int k = 0; k < M; ++k) s.push_back(static_cast<int>((start + k) % N) + 1);
  std::sort(s.begin(), s.end());
  return s;
}

PeriodicSchedule round_robin_schedule(int N, int M) {
  const int period = N / std::gcd(N, M);
  PeriodicSchedule sched;
  for (int t = 0; t < period; ++t) sched.sequence.push_back(round_robin(N, M, t));
  return sched;
}

Subset random_schedule(int N, int M, RandomSource& rng) {
  return action_to_subset(rng.uniform_index(binomial(N, M)), N, M);
}

Subset greedy_error(const EnvModel& model, const Observation& obs, int stage) {
  require(obs.size() == model.observation_dim, "greedy_error: observation length mismatch");
  require(stage >= 0 && stage < model.horizon(), "greedy_error: stage out of range");
  const int N = model.subsystems();
  std::vector<double> penalty(N);
  for (int i = 0; i < N; ++i) {
    const auto n = model.plants[i].spec().n();
    const Eigen::Map<const Vector> e(obs.data() + model.offsets[i], n);
    penalty[i] = error_loss_term(model.gains[i].Gamma[stage], e);
  }
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return penalty[a] > penalty[b]; });
  Subset s;
  for (int k = 0; k < model.channels(); ++k) s.push_back(order[k] + 1);
  std::sort(s.begin(), s.end());
  return s;
}

SchedulePolicy periodic_policy(const EnvModel& model, PeriodicSchedule schedule) {
  validate(schedule, model.subsystems(), model.channels());
  const int N = model.subsystems();
  return [N, schedule = std::move(schedule)](const Observation&, int stage) {
    return subset_to_action(schedule.at(stage), N);
  };
}

SchedulePolicy round_robin_policy(const EnvModel& model) {
  const int N = model.subsystems();
  const int M = model.channels();
  return [N, M](const Observation&, int stage) {
    return subset_to_action(round_robin(N, M, stage), N);
  };
}

SchedulePolicy random_policy(const EnvModel& model, std::uint64_t seed) {
  auto rng = std::make_shared<RandomSource>(seed);
  const std::uint64_t actions = model.action_count;
  return [rng, actions](const Observation&, int) { return rng->uniform_index(actions); };
}

SchedulePolicy greedy_error_policy(const EnvModel& model) {
  return [&model](const Observation& obs, int stage) {
    return subset_to_action(greedy_error(model, obs, stage), model.subsystems());
  };
}

MonteCarloEstimate monte_carlo_loss(std::shared_ptr<const EnvModel> model,
                                    const std::function<SchedulePolicy(std::uint64_t)>& make_policy,
                                    int runs, std::uint64_t seed, int threads) {
  require(runs >= 1, "monte_carlo_loss: need at least one run");
  const int N = model->subsystems();
  std::vector<EpisodeSummary> results(runs);
  parallel_for(static_cast<std::size_t>(runs), threads, [&](std::size_t k) {
    SchedulingEnv env(model);
    const std::uint64_t episode_seed = derive_seed(seed, k, tag(StreamTag::episode));
    SchedulePolicy policy = make_policy(episode_seed);
    results[k] = run_episode(env, policy, episode_seed);
    results[k].stage_losses.clear();
  });

  MonteCarloEstimate est;
  est.runs = runs;
  est.allocation.assign(N, 0.0);
  double sum_sq = 0.0;
  for (const auto& r : results) {
    est.mean_total_loss += r.total_loss;
    est.mean_error_term += r.error_term;
    for (int i = 0; i < N; ++i) est.allocation[i] += r.schedule_counts[i];
  }
  est.mean_total_loss /= runs;
  est.mean_error_term /= runs;
  for (const auto& r : results) sum_sq += std::pow(r.total_loss - est.mean_total_loss, 2);
  est.stderr_total_loss = runs > 1 ? std::sqrt(sum_sq / (runs - 1) / runs) : 0.0;
  for (double& a : est.allocation) a /= static_cast<double>(runs) * model->horizon();
  return est;
}

std::string format_schedule(const PeriodicSchedule& schedule) {
  std::string out;
  for (std::size_t k = 0; k < schedule.sequence.size(); ++k) {
    if (k) out += '|';
    const Subset& s = schedule.sequence[k];
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j) out += ' ';
      out += std::to_string(s[j]);
    }
  }
  return out;
}

namespace {

Subset parse_subset(const std::string& text) {
  Subset s;
  std::string cleaned = text;
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  std::istringstream is(cleaned);
  int v = 0;
  while (is >> v) s.push_back(v);
  if (!is.eof()) throw SpecificationError("malformed schedule entry '" + text + "'");
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

PeriodicSchedule parse_schedule(const std::string& text) {
  PeriodicSchedule sched;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const std::size_t end = std::min(text.find('|', begin), text.size());
    sched.sequence.push_back(parse_subset(text.substr(begin, end - begin)));
    begin = end + 1;
  }
  return sched;
}

PeriodicSchedule read_schedule_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecificationError("cannot open schedule file '" + path + "'");
  PeriodicSchedule sched;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
    sched.sequence.push_back(parse_subset(line));
  }
  if (sched.sequence.empty()) throw SpecificationError("schedule file '" + path + "' is empty");
  return sched;
}

void write_search_csv(std::ostream& os, const SearchResult& result) {
  os << "period,sequence,oracle_loss,candidates\n";
  os << result.schedule.period() << ',' << format_schedule(result.schedule) << ','
     << Num{result.loss} << ',' << result.candidates << '\n';
}

}  // namespace deepcas
