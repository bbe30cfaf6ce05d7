#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "deepcas/baselines.hpp"
#include "deepcas/errors.hpp"
#include "fixtures.hpp"

using namespace deepcas;
using namespace deepcas::test;

namespace {

std::shared_ptr<const EnvModel> scalar_pair(int horizon) {
  EnvConfig env;
  env.specs = {scalar_spec(1.2, 0.1, 0.1, 1.0, 1.0), scalar_spec(1.2, 0.1, 0.1, 1.0, 1.0)};
  env.channels = 1;
  env.horizon = horizon;
  return make_env_model(env);
}

PeriodicSchedule sched(std::initializer_list<Subset> entries) { return PeriodicSchedule{entries}; }

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("full scheduling has no error term") {
  EnvConfig env = benchmark_config().env;
  env.channels = 3;
  env.horizon = 100;
  auto model = make_env_model(env, true);
  const ScheduleOracle oracle(*model);
  const PeriodicSchedule all = sched({{1, 2, 3}});
  CHECK(oracle.expected_error_term(all) == 0.0);
  CHECK(oracle.expected_loss(all) == oracle.baseline_loss());
}

TEST_CASE("three-stage hand recursion") {
  auto model = scalar_pair(3);
  const double a = 1.2, w = 0.1, v = 0.1;

  double S[4], L[3], G[3];
  S[3] = 1.0;
  for (int t = 2; t >= 0; --t) {
    L[t] = a * S[t + 1] / (S[t + 1] + 1.0);
    S[t] = a * a * S[t + 1] + 1.0 - a * S[t + 1] * L[t];
    G[t] = L[t] * L[t] * (S[t + 1] + 1.0);
  }
  double Ppred[3], Pfilt[3], K[3];
  for (int t = 0; t < 3; ++t) {
    Ppred[t] = t == 0 ? 1.0 : a * a * Pfilt[t - 1] + w;
    K[t] = Ppred[t] / (Ppred[t] + v);
    Pfilt[t] = (1.0 - K[t]) * Ppred[t];
  }
  double baseline = 1.0 * S[0] + S[0] * 1.0;
  for (int t = 0; t < 3; ++t) baseline += S[t + 1] * w + Pfilt[t] * G[t];
  double sigma = 0.0, err = 0.0;
  for (int t = 0; t < 3; ++t) {
    sigma = a * a * sigma + K[t] * K[t] * (Ppred[t] + v);
    err += G[t] * sigma;
  }
  const double expected = 2.0 * baseline + err;

  const ScheduleOracle oracle(*model);
  CHECK(std::abs(oracle.subsystem_baseline(0) - baseline) < 1e-10);
  CHECK(std::abs(oracle.expected_loss(sched({{1}, {1}, {1}})) - expected) < 1e-10);
  CHECK(std::abs(oracle.expected_loss(sched({{1}})) - expected) < 1e-10);
}

TEST_CASE("oracle is deterministic") {
  auto model = make_env_model(benchmark_config().env);
  const PeriodicSchedule s = sched({{1}, {3}, {1}, {2}});
  CHECK(expected_schedule_loss(*model, s) == expected_schedule_loss(*model, s));
}

TEST_CASE("oracle agrees with simulation on the scalar pair") {
  auto model = scalar_pair(50);
  for (const PeriodicSchedule& s : {sched({{1}, {2}}), sched({{1}, {1}, {2}})}) {
    const double oracle = expected_schedule_loss(*model, s);
    const MonteCarloEstimate mc = monte_carlo_loss(
        model, [&](std::uint64_t) { return periodic_policy(*model, s); }, 10000, 5);
    CHECK(std::abs(mc.mean_total_loss - oracle) / oracle < 0.03);
  }
}

TEST_CASE("search puts every slot on the only penalized loop") {
  EnvConfig env = benchmark_config().env;
  env.specs.resize(2);
  env.specs[1].Q.setZero();
  env.specs[1].Qf.setZero();
  env.horizon = 100;
  auto model = make_env_model(env);
  const SearchResult r = exhaustive_periodic_search(*model, 2, 6);
  CHECK(r.schedule.period() == 2);
  for (const Subset& s : r.schedule.sequence) CHECK(s == Subset{1});
}

TEST_CASE("symmetric pair prefers alternation") {
  auto model = scalar_pair(60);
  const SearchResult r = exhaustive_periodic_search(*model, 2, 4);
  const double alt = std::min(expected_schedule_loss(*model, sched({{1}, {2}})),
                              expected_schedule_loss(*model, sched({{2}, {1}})));
  CHECK(r.loss == doctest::Approx(alt).epsilon(1e-12));
  CHECK(r.candidates == 4 + 8 + 16);
}

TEST_CASE("search budget guard") {
  auto model = make_env_model(benchmark_config("exp2_n6m3.json").env);
  CHECK_THROWS_AS(exhaustive_periodic_search(*model, 2, 11), BudgetExceeded);
  CHECK(periodic_candidate_count(3, 1, 2, 11) == 265716.0);
  CHECK(periodic_candidate_count(3, 1, 11, 11) == 177147.0);
}

TEST_CASE("search never loses to round robin") {
  auto model = make_env_model(benchmark_config().env);
  const SearchResult r = exhaustive_periodic_search(*model, 2, 6);
  CHECK(r.loss <= expected_schedule_loss(*model, round_robin_schedule(3, 1)));
  CHECK(r.loss == expected_schedule_loss(*model, r.schedule));
}

TEST_CASE("round robin cycle") {
  CHECK(round_robin(3, 1, 0) == Subset{1});
  CHECK(round_robin(3, 1, 1) == Subset{2});
  CHECK(round_robin(3, 1, 2) == Subset{3});
  CHECK(round_robin(3, 1, 3) == Subset{1});
  CHECK(round_robin(6, 3, 1) == Subset{4, 5, 6});
  CHECK(round_robin_schedule(6, 3).period() == 2);
  CHECK(round_robin_schedule(3, 1).period() == 3);
}

TEST_CASE("greedy error ranking") {
  EnvConfig env;
  for (int i = 0; i < 3; ++i) env.specs.push_back(scalar_spec(1.2, 0.1, 0.1, 1.0));
  env.horizon = 1;
  env.channels = 1;
  auto model = make_env_model(env);
  REQUIRE(std::abs(model->gains[0].Gamma[0](0, 0) - 0.72) < 1e-12);
  const Observation obs{1.0, std::sqrt(0.1 / 0.72), std::sqrt(0.3 / 0.72)};
  CHECK(greedy_error(*model, obs, 0) == Subset{1});
  CHECK(greedy_error(*model, Observation{0.0, 0.0, 0.0}, 0) == Subset{1});

  env.channels = 2;
  auto two = make_env_model(env);
  CHECK(greedy_error(*two, obs, 0) == Subset{1, 3});
  CHECK(greedy_error(*two, Observation{0.0, 0.0, 0.0}, 0) == Subset{1, 2});
}

TEST_CASE("random schedule is uniform") {
  RandomSource rng(4);
  std::vector<int> counts(20, 0);
  for (int k = 0; k < 100000; ++k) ++counts[subset_to_action(random_schedule(6, 3, rng), 6)];
  for (int c : counts) CHECK(std::abs(c / 100000.0 - 0.05) < 0.005);
}

TEST_CASE("Monte Carlo estimate does not depend on the thread count") {
  EnvConfig env = benchmark_config().env;
  env.horizon = 40;
  auto model = make_env_model(env);
  auto make = [&](std::uint64_t s) { return random_policy(*model, s); };
  const MonteCarloEstimate one = monte_carlo_loss(model, make, 50, 3, 1);
  const MonteCarloEstimate four = monte_carlo_loss(model, make, 50, 3, 4);
  CHECK(one.mean_total_loss == four.mean_total_loss);
  CHECK(one.allocation == four.allocation);
  double sum = 0.0;
  for (double a : one.allocation) sum += a;
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("schedule text round trip") {
  const PeriodicSchedule s = parse_schedule("1 2 3|4 5 6");
  CHECK(s.period() == 2);
  CHECK(s.sequence[1] == Subset{4, 5, 6});
  CHECK(format_schedule(s) == "1 2 3|4 5 6");
  CHECK(format_schedule(parse_schedule("3|1")) == "3|1");
  CHECK(parse_schedule("2,1").sequence[0] == Subset{1, 2});
  CHECK_THROWS_AS(parse_schedule("1|x"), SpecificationError);
  CHECK(s.at(3) == Subset{4, 5, 6});

  const std::string path = "schedule_roundtrip.txt";
  {
    std::ofstream f(path);
    f << "# two-stage schedule\n3\n\n1  # comment\n";
  }
  CHECK(format_schedule(read_schedule_file(path)) == "3|1");
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_schedule_file("does_not_exist.txt"), SpecificationError);
}

TEST_CASE("schedule validation") {
  CHECK_THROWS_AS(validate(sched({{1, 2}}), 3, 1), ContractViolation);
  CHECK_THROWS_AS(validate(sched({{4}}), 3, 1), ContractViolation);
  CHECK_THROWS_AS(validate(PeriodicSchedule{}, 3, 1), ContractViolation);
  CHECK_NOTHROW(validate(sched({{3}, {1}}), 3, 1));
}

TEST_CASE("search csv") {
  SearchResult r{sched({{3}, {1}}), 12.5, 9};
  std::ostringstream os;
  write_search_csv(os, r);
  CHECK(os.str() == "period,sequence,oracle_loss,candidates\n2,3|1,12.5,9\n");
}

}  // TEST_SUITE
