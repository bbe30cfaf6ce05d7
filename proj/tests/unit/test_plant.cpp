#include <cmath>
#include <vector>

#include "doctest.h"

#include "deepcas/errors.hpp"
#include "deepcas/plant.hpp"
#include "fixtures.hpp"

using namespace deepcas;
using namespace deepcas::test;

namespace {

SubsystemSpec two_state_spec() {
  SubsystemSpec s;
  s.A = mat({{0.9, 0.1}, {0.0, 0.8}});
  s.B = mat({{0.0}, {1.0}});
  s.C = mat({{1.0, 0.0}});
  s.W = Matrix::Zero(2, 2);
  s.V = scalar(1.0);
  s.x0_mean = vec({1.0, 2.0});
  s.X0 = Matrix::Zero(2, 2);
  s.Q = Matrix::Identity(2, 2);
  s.R = scalar(1.0);
  s.Qf = Matrix::Identity(2, 2);
  return s;
}

}  // namespace

TEST_SUITE("plant") {

TEST_CASE("sample_initial with zero covariance returns the mean exactly") {
  RandomSource rng(3);
  const PlantState s = sample_initial(two_state_spec(), rng);
  CHECK(s.x(0) == 1.0);
  CHECK(s.x(1) == 2.0);
  CHECK(s.t == 0);
}

TEST_CASE("sample_initial moments for identity covariance") {
  SubsystemSpec spec = two_state_spec();
  spec.x0_mean = vec({0.0, 0.0});
  spec.X0 = Matrix::Identity(2, 2);
  RandomSource rng(11);
  const int n = 100000;
  Vector sum = Vector::Zero(2);
  Matrix outer = Matrix::Zero(2, 2);
  for (int k = 0; k < n; ++k) {
    const Vector x = sample_initial(spec, rng).x;
    sum += x;
    outer += x * x.transpose();
  }
  const Vector mean = sum / n;
  const Matrix cov = outer / n - mean * mean.transpose();
  CHECK(mean.cwiseAbs().maxCoeff() < 0.02);
  CHECK((cov - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("sample_initial scalar standard deviation") {
  const SubsystemSpec spec = scalar_spec(1.0, 0.0, 1.0, 4.0, 1.0);
  RandomSource rng(5);
  const int n = 100000;
  double s = 0.0, ss = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = sample_initial(spec, rng).x(0);
    s += x;
    ss += x * x;
  }
  const double sd = std::sqrt(ss / n - (s / n) * (s / n));
  CHECK(sd >= 1.96);
  CHECK(sd <= 2.04);
}

TEST_CASE("indefinite covariance is a specification error") {
  SubsystemSpec spec = two_state_spec();
  spec.X0 = mat({{1.0, 0.0}, {0.0, -1.0}});
  RandomSource rng(1);
  CHECK_THROWS_AS(sample_initial(spec, rng), SpecificationError);
  CHECK_THROWS_AS(validate(spec), SpecificationError);
}

TEST_CASE("singular covariance is accepted and sampled along its range") {
  GaussianSampler g(mat({{1.0, 1.0}, {1.0, 1.0}}));
  RandomSource rng(2);
  for (int k = 0; k < 100; ++k) {
    const Vector x = g.draw(rng);
    CHECK(x(0) == doctest::Approx(x(1)).epsilon(1e-9));
  }
}

TEST_CASE("step_plant hand evaluations") {
  const SubsystemSpec spec = scalar_spec(1.2, 0.0, 1.0, 0.0);
  RandomSource rng(1);
  PlantState s{vec({1.0}), 0};
  PlantState next = step_plant(spec, s, vec({0.0}), rng);
  CHECK(next.x(0) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(next.t == 1);
  next = step_plant(spec, s, vec({-0.6}), rng);
  CHECK(next.x(0) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("identity dynamics without input keep the state") {
  SubsystemSpec spec = two_state_spec();
  spec.A = Matrix::Identity(2, 2);
  spec.B = Matrix::Zero(2, 1);
  RandomSource rng(1);
  PlantState s{vec({3.0, -4.0}), 7};
  const PlantState next = step_plant(spec, s, vec({5.0}), rng);
  CHECK(next.x == s.x);
  CHECK(next.t == 8);
}

TEST_CASE("dimension mismatch is a contract violation") {
  const SubsystemSpec spec = two_state_spec();
  RandomSource rng(1);
  PlantState s{vec({1.0}), 0};
  CHECK_THROWS_AS(step_plant(spec, s, vec({0.0}), rng), ContractViolation);
  PlantState ok{vec({1.0, 2.0}), 0};
  CHECK_THROWS_AS(step_plant(spec, ok, vec({0.0, 1.0}), rng), ContractViolation);
}

TEST_CASE("measure examples") {
  SubsystemSpec spec = two_state_spec();
  spec.V = scalar(0.0);
  RandomSource rng(1);
  CHECK(measure(spec, PlantState{vec({3.0, 7.0}), 0}, rng)(0) == 3.0);

  SubsystemSpec ident = two_state_spec();
  ident.C = Matrix::Identity(2, 2);
  ident.V = Matrix::Zero(2, 2);
  const Vector y = measure(ident, PlantState{vec({3.0, 7.0}), 0}, rng);
  CHECK(y(0) == 3.0);
  CHECK(y(1) == 7.0);

  const SubsystemSpec noisy = scalar_spec(1.0, 0.0, 0.1, 0.0);
  const int n = 100000;
  double s = 0.0, ss = 0.0;
  for (int k = 0; k < n; ++k) {
    const double v = measure(noisy, PlantState{vec({0.0}), 0}, rng)(0);
    s += v;
    ss += v * v;
  }
  const double var = ss / n - (s / n) * (s / n);
  CHECK(var >= 0.095);
  CHECK(var <= 0.105);
}

TEST_CASE("spectral_radius examples") {
  CHECK(spectral_radius(Matrix::Identity(2, 2)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(spectral_radius(mat({{1.2, 0.0}, {0.0, 0.5}})) == doctest::Approx(1.2).epsilon(1e-9));
  CHECK(spectral_radius(mat({{0.0, 1.0}, {-0.25, 1.0}})) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(spectral_radius(mat({{0.0, -1.0}, {1.0, 0.0}})) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(spectral_radius(mat({{0.0, 1.0}, {-0.69, 1.75}})) == doctest::Approx(1.15).epsilon(1e-9));
  CHECK_THROWS_AS(spectral_radius(Matrix::Zero(2, 3)), ContractViolation);
}

TEST_CASE("validate rejects malformed specifications") {
  SubsystemSpec spec = two_state_spec();
  CHECK_NOTHROW(validate(spec));

  SubsystemSpec asym = spec;
  asym.Q = mat({{1.0, 0.5}, {0.0, 1.0}});
  CHECK_THROWS_AS(validate(asym), SpecificationError);

  SubsystemSpec singular_v = spec;
  singular_v.V = scalar(0.0);
  CHECK_THROWS_AS(validate(singular_v), SpecificationError);

  SubsystemSpec bad_r = spec;
  bad_r.R = scalar(-1.0);
  CHECK_THROWS_AS(validate(bad_r), SpecificationError);

  SubsystemSpec bad_shape = spec;
  bad_shape.B = Matrix::Zero(3, 1);
  CHECK_THROWS_AS(validate(bad_shape), SpecificationError);

  SubsystemSpec bad_mean = spec;
  bad_mean.x0_mean = vec({1.0});
  CHECK_THROWS_AS(validate(bad_mean), SpecificationError);
}

TEST_CASE("zero noise makes trajectories independent of the seed") {
  const SubsystemSpec spec = scalar_spec(1.1, 0.0, 0.0, 0.0, 2.0);
  auto run = [&](std::uint64_t seed) {
    RandomSource rng(seed);
    PlantState s = sample_initial(spec, rng);
    std::vector<double> xs;
    for (int t = 0; t < 20; ++t) {
      s = step_plant(spec, s, vec({-0.5 * s.x(0)}), rng);
      xs.push_back(s.x(0));
    }
    return xs;
  };
  CHECK(run(1) == run(999));
}

TEST_CASE("same seed reproduces a noisy trajectory") {
  const SubsystemSpec spec = scalar_spec(1.1, 0.3, 0.2, 1.0);
  auto run = [&](std::uint64_t seed) {
    RandomSource rng(seed);
    PlantState s = sample_initial(spec, rng);
    std::vector<double> out;
    for (int t = 0; t < 50; ++t) {
      out.push_back(measure(spec, s, rng)(0));
      s = step_plant(spec, s, vec({0.0}), rng);
    }
    return out;
  };
  CHECK(run(42) == run(42));
  CHECK(run(42) != run(43));
}

TEST_CASE("noise streams are uncorrelated across subsystems and time") {
  const int n = 100000;
  RandomSource a(derive_seed(7, 0, tag(StreamTag::plant_noise)));
  RandomSource b(derive_seed(7, 1, tag(StreamTag::plant_noise)));
  std::vector<double> xa(n), xb(n);
  for (int k = 0; k < n; ++k) {
    xa[k] = a.normal();
    xb[k] = b.normal();
  }
  auto corr = [&](const std::vector<double>& u, const std::vector<double>& v, int lag) {
    double s = 0.0;
    for (int k = 0; k + lag < n; ++k) s += u[k] * v[k + lag];
    return s / (n - lag);
  };
  CHECK(std::abs(corr(xa, xb, 0)) < 0.02);
  CHECK(std::abs(corr(xa, xa, 1)) < 0.02);
  CHECK(std::abs(corr(xa, xb, 1)) < 0.02);
}

TEST_CASE("RandomSource state round-trips through serialization") {
  RandomSource rng(99);
  for (int k = 0; k < 7; ++k) rng.normal();
  const RandomSource copy = RandomSource::deserialize(rng.serialize());
  CHECK(copy == rng);
  RandomSource c2 = copy;
  CHECK(c2.normal() == rng.normal());
  CHECK(c2.uniform() == rng.uniform());
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(1, 0, 1) != derive_seed(1, 1, 1));
  CHECK(derive_seed(1, 0, 1) != derive_seed(2, 0, 1));
  CHECK(derive_seed(1, 0, 1) != derive_seed(1, 0, 2));
  CHECK(derive_seed(5, 3) == derive_seed(5, 3));
}

}  // TEST_SUITE
