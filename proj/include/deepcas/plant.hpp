#pragma once

#include <Eigen/Dense>
#include <string>

#include "deepcas/random.hpp"

namespace deepcas {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// One control loop: x' = A x + B u + w, y = C x + v, with quadratic costs.
struct SubsystemSpec {
  std::string name;
  Matrix A;   // n x n
  Matrix B;   // n x m
  Matrix C;   // p x n
  Matrix W;   // process noise covariance
  Matrix V;   // measurement noise covariance
  Vector x0_mean;
  Matrix X0;  // initial state covariance
  Matrix Q;
  Matrix R;
  Matrix Qf;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }
};

inline constexpr double kSpecTolerance = 1e-9;
inline constexpr double kEigenClipTolerance = 1e-12;

// Checks dimensions, symmetry, and definiteness; throws SpecificationError.
void validate(const SubsystemSpec& spec);

struct PlantState {
  Vector x;
  int t = 0;
};

// Symmetric square root of a PSD covariance. Eigenvalues within the clip
// tolerance of zero are clipped; anything more negative is rejected.
Matrix covariance_root(const Matrix& cov, const char* what = "covariance");

// Zero-mean Gaussian draws with a fixed covariance.
class GaussianSampler {
 public:
  GaussianSampler() = default;
  explicit GaussianSampler(const Matrix& cov, const char* what = "covariance");

  Vector draw(RandomSource& rng) const;
  const Matrix& root() const { return root_; }

 private:
  Matrix root_;
};

// A validated subsystem with its noise factorizations cached.
class Plant {
 public:
  explicit Plant(SubsystemSpec spec);

  const SubsystemSpec& spec() const { return spec_; }

  PlantState sample_initial(RandomSource& rng) const;
  PlantState step(const PlantState& state, const Vector& u, RandomSource& rng) const;
  Vector measure(const PlantState& state, RandomSource& rng) const;

 private:
  SubsystemSpec spec_;
  GaussianSampler initial_;
  GaussianSampler process_;
  GaussianSampler measurement_;
};

PlantState sample_initial(const SubsystemSpec& spec, RandomSource& rng);
PlantState step_plant(const SubsystemSpec& spec, const PlantState& state, const Vector& u,
                      RandomSource& rng);
Vector measure(const SubsystemSpec& spec, const PlantState& state, RandomSource& rng);

// Largest |eigenvalue| of a square matrix.
double spectral_radius(const Matrix& A);

}  // namespace deepcas
