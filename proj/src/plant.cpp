#include "deepcas/plant.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "deepcas/errors.hpp"

namespace deepcas {
namespace {

void check_shape(const Matrix& M, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (M.rows() != rows || M.cols() != cols) {
    throw SpecificationError(name + " must be " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + std::to_string(M.rows()) + "x" +
                             std::to_string(M.cols()));
  }
}

double min_eigenvalue(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

void check_symmetric(const Matrix& M, const std::string& name) {
  if (M.size() == 0) return;
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > kSpecTolerance)
    throw SpecificationError(name + " is not symmetric");
}

void check_psd(const Matrix& M, const std::string& name) {
  check_symmetric(M, name);
  if (M.size() > 0 && min_eigenvalue(M) < -kSpecTolerance)
    throw SpecificationError(name + " is not positive semi-definite");
}

void check_pd(const Matrix& M, const std::string& name) {
  check_symmetric(M, name);
  if (M.size() == 0 || !(min_eigenvalue(M) > 0.0))
    throw SpecificationError(name + " is not positive definite");
}

}  // namespace

void validate(const SubsystemSpec& s) {
  const auto n = s.A.rows();
  const auto m = s.B.cols();
  const auto p = s.C.rows();
  if (n <= 0 || m <= 0 || p <= 0) throw SpecificationError("dimensions n, m, p must be positive");
  check_shape(s.A, n, n, "A");
  check_shape(s.B, n, m, "B");
  check_shape(s.C, p, n, "C");
  check_shape(s.W, n, n, "W");
  check_shape(s.V, p, p, "V");
  check_shape(s.X0, n, n, "X0");
  check_shape(s.Q, n, n, "Q");
  check_shape(s.R, m, m, "R");
  check_shape(s.Qf, n, n, "Qf");
  if (s.x0_mean.size() != n) throw SpecificationError("x0_mean must have length n");
  if (!s.A.allFinite() || !s.B.allFinite() || !s.C.allFinite() || !s.x0_mean.allFinite())
    throw SpecificationError("non-finite entry in A, B, C or x0_mean");
  check_psd(s.W, "W");
  check_psd(s.X0, "X0");
  check_psd(s.Q, "Q");
  check_psd(s.Qf, "Qf");
  check_pd(s.V, "V");
  check_pd(s.R, "R");
}

Matrix covariance_root(const Matrix& cov, const char* what) {
  if (cov.rows() != cov.cols()) throw ContractViolation(std::string(what) + " must be square");
  if (cov.size() == 0) return cov;
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success)
    throw SpecificationError(std::string("eigen-decomposition of ") + what + " failed");
  Vector lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -kSpecTolerance * scale)
      throw SpecificationError(std::string(what) + " is indefinite; cannot factor");
    lambda(i) = lambda(i) <= kEigenClipTolerance * scale ? 0.0 : std::sqrt(lambda(i));
  }
  const Matrix& U = eig.eigenvectors();
  return U * lambda.asDiagonal() * U.transpose();
}

GaussianSampler::GaussianSampler(const Matrix& cov, const char* what)
    : root_(covariance_root(cov, what)) {}

Vector GaussianSampler::draw(RandomSource& rng) const {
  Vector z(root_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return root_ * z;
}

Plant::Plant(SubsystemSpec spec)
    : spec_(std::move(spec)),
      initial_(spec_.X0, "X0"),
      process_(spec_.W, "W"),
      measurement_(spec_.V, "V") {}

PlantState Plant::sample_initial(RandomSource& rng) const {
  return PlantState{spec_.x0_mean + initial_.draw(rng), 0};
}

PlantState Plant::step(const PlantState& state, const Vector& u, RandomSource& rng) const {
  require(state.x.size() == spec_.n(), "step_plant: state dimension mismatch");
  require(u.size() == spec_.m(), "step_plant: input dimension mismatch");
  return PlantState{spec_.A * state.x + spec_.B * u + process_.draw(rng), state.t + 1};
}

Vector Plant::measure(const PlantState& state, RandomSource& rng) const {
  require(state.x.size() == spec_.n(), "measure: state dimension mismatch");
  return spec_.C * state.x + measurement_.draw(rng);
}

PlantState sample_initial(const SubsystemSpec& spec, RandomSource& rng) {
  return PlantState{spec.x0_mean + GaussianSampler(spec.X0, "X0").draw(rng), 0};
}

PlantState step_plant(const SubsystemSpec& spec, const PlantState& state, const Vector& u,
                      RandomSource& rng) {
  require(state.x.size() == spec.n() && spec.A.rows() == spec.A.cols(),
          "step_plant: state dimension mismatch");
  require(u.size() == spec.B.cols(), "step_plant: input dimension mismatch");
  return PlantState{spec.A * state.x + spec.B * u + GaussianSampler(spec.W, "W").draw(rng),
                    state.t + 1};
}

Vector measure(const SubsystemSpec& spec, const PlantState& state, RandomSource& rng) {
  require(state.x.size() == spec.C.cols(), "measure: state dimension mismatch");
  return spec.C * state.x + GaussianSampler(spec.V, "V").draw(rng);
}

double spectral_radius(const Matrix& A) {
  require(A.rows() == A.cols(), "spectral_radius: matrix must be square");
  const Eigen::Index n = A.rows();
  if (n == 0) return 0.0;

  constexpr double kTol = 1e-10;
  constexpr int kMaxIter = 10000;

  // Power iteration on the two-step growth ratio, which also settles for a
  // dominant real pair of opposite sign. Several unrelated starts guard
  // against one of them lying in a subdominant invariant subspace.
  auto iterate = [&](Vector x) -> std::optional<double> {
    x.normalize();
    double previous = -1.0;
    for (int it = 0; it < kMaxIter; ++it) {
      const Vector y = A * (A * x);
      const double growth = y.norm();
      if (growth == 0.0) return 0.0;
      const double estimate = std::sqrt(growth);
      if (std::abs(estimate - previous) <= kTol * std::max(1.0, estimate)) return estimate;
      previous = estimate;
      x = y / growth;
    }
    return std::nullopt;
  };
  double radius = 0.0;
  bool converged = true;
  for (int start = 0; start < 3 && converged; ++start) {
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double k = static_cast<double>(i);
      x(i) = start == 0 ? 1.0 / (k + 1.5) : start == 1 ? std::cos(1.3 * k + 0.7) : 0.31 - 0.17 * k;
    }
    const std::optional<double> r = iterate(x);
    if (r) radius = std::max(radius, *r);
    else converged = false;
  }
  if (converged) return radius;
  // No convergence (complex dominant pair or a defective eigenvalue):
  // fall back to a direct eigenvalue computation.
  Eigen::EigenSolver<Matrix> eig(A, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace deepcas
