#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "deepcas/combinatorics.hpp"
#include "deepcas/scheduling_env.hpp"

namespace deepcas {

// A fixed sequence of M-subsets applied cyclically over the horizon.
struct PeriodicSchedule {
  std::vector<Subset> sequence;

  int period() const { return static_cast<int>(sequence.size()); }
  const Subset& at(int stage) const { return sequence[stage % sequence.size()]; }

  friend bool operator==(const PeriodicSchedule&, const PeriodicSchedule&) = default;
};

// Throws ContractViolation unless every entry is an increasing M-subset of 1..N.
void validate(const PeriodicSchedule& schedule, int N, int M);

// Exact expected total loss of fixed schedules by covariance propagation.
//
// Before transmission the estimate error evolves as e = A e_prev + K_t nu_t
// with white innovation nu_t, so its covariance follows
//   Sigma_t = A Sigma_{t-1} A' + K_t (C P_{t|t-1} C' + V) K_t'
// and is reset to zero on every scheduled stage. The loss is the perfect-
// communication baseline plus sum_t Tr(Gamma_t Sigma_t).
class ScheduleOracle {
 public:
  explicit ScheduleOracle(const EnvModel& model);

  double baseline_loss() const { return baseline_total_; }
  double subsystem_baseline(int i) const { return baseline_[i]; }

  // sum_t Tr(Gamma_t Sigma_t) for subsystem i (0-based); scheduled(t) says
  // whether the loop communicates at stage t.
  template <typename Pred>
  double error_cost(int i, Pred&& scheduled) const;

  // Error cost of subsystem i under a periodic on/off pattern: bit k of
  // `pattern` is set if the loop is scheduled at stages t = k (mod period).
  double pattern_cost(int i, int period, std::uint32_t pattern) const;

  double expected_loss(const PeriodicSchedule& schedule) const;
  double expected_error_term(const PeriodicSchedule& schedule) const;

  const EnvModel& model() const { return model_; }

 private:
  const EnvModel& model_;
  std::vector<double> baseline_;
  double baseline_total_ = 0.0;
  std::vector<std::vector<Matrix>> innovation_;  // K_t S_nu K_t' per subsystem
};

double expected_schedule_loss(const EnvModel& model, const PeriodicSchedule& schedule);

inline constexpr double kDefaultSearchBudget = 1e7;

struct SearchResult {
  PeriodicSchedule schedule;
  double loss = 0.0;
  std::uint64_t candidates = 0;
};

// Number of periodic schedules with period in [p_min, p_max], saturating.
double periodic_candidate_count(int N, int M, int p_min, int p_max);

// Minimizes the oracle loss over every periodic schedule with period in
// [p_min, p_max]; ties go to the shorter period, then to the
// lexicographically smaller sequence of action indices. Throws
// BudgetExceeded if the candidate count exceeds `budget`.
SearchResult exhaustive_periodic_search(const EnvModel& model, int p_min = 2, int p_max = 11,
                                        double budget = kDefaultSearchBudget);

// Stage t of the cyclic schedule {1..M}, {M+1..2M}, ... (indices wrap mod N).
Subset round_robin(int N, int M, int stage);
// Smallest period over which round_robin repeats.
PeriodicSchedule round_robin_schedule(int N, int M);
Subset random_schedule(int N, int M, RandomSource& rng);
// Top-M loops by current e' Gamma_t e; ties to the lower index.
Subset greedy_error(const EnvModel& model, const Observation& obs, int stage);

SchedulePolicy periodic_policy(const EnvModel& model, PeriodicSchedule schedule);
SchedulePolicy round_robin_policy(const EnvModel& model);
SchedulePolicy random_policy(const EnvModel& model, std::uint64_t seed);
SchedulePolicy greedy_error_policy(const EnvModel& model);

struct MonteCarloEstimate {
  double mean_total_loss = 0.0;
  double stderr_total_loss = 0.0;
  double mean_error_term = 0.0;
  std::vector<double> allocation;
  int runs = 0;
};

// Averages `runs` episodes of `policy`; episode k uses
// derive_seed(seed, k, StreamTag::episode) and a fresh policy from
// make_policy(episode seed), so results do not depend on the thread count.
MonteCarloEstimate monte_carlo_loss(std::shared_ptr<const EnvModel> model,
                                    const std::function<SchedulePolicy(std::uint64_t)>& make_policy,
                                    int runs, std::uint64_t seed, int threads = 0);

// Text form used by schedule files and CSV: entries separated by '|', subset
// members by spaces, e.g. "1|3|1|2" or "1 2 3|4 5 6".
std::string format_schedule(const PeriodicSchedule& schedule);
PeriodicSchedule parse_schedule(const std::string& text);
// Schedule file: one stage per line, 1-based subsystem indices separated by
// whitespace or commas; blank lines and '#' comments are ignored.
PeriodicSchedule read_schedule_file(const std::string& path);

void write_search_csv(std::ostream& os, const SearchResult& result);

// ---------------------------------------------------------------------------

template <typename Pred>
double ScheduleOracle::error_cost(int i, Pred&& scheduled) const {
  const SubsystemSpec& spec = model_.plants[i].spec();
  const GainSchedule& g = model_.gains[i];
  const auto n = spec.n();
  Matrix sigma = Matrix::Zero(n, n);
  double cost = 0.0;
  for (int t = 0; t < model_.horizon(); ++t) {
    if (scheduled(t)) {
      sigma.setZero();
      continue;
    }
    sigma = spec.A * sigma * spec.A.transpose() + innovation_[i][t];
    cost += (g.Gamma[t] * sigma).trace();
  }
  return cost;
}

}  // namespace deepcas
