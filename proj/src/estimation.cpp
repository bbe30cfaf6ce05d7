#include "deepcas/estimation.hpp"

#include "deepcas/errors.hpp"

namespace deepcas {
namespace {

Matrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

Matrix predicted_covariance(const SubsystemSpec& s, const Matrix& P_filt) {
  return symmetrize(s.A * P_filt * s.A.transpose() + s.W);
}

struct GainResult {
  Matrix K;
  Matrix P_filt;
  Matrix innovation_cov;
};

GainResult filter_gain(const SubsystemSpec& s, const Matrix& P_pred) {
  GainResult out;
  out.innovation_cov = symmetrize(s.C * P_pred * s.C.transpose() + s.V);
  Eigen::LLT<Matrix> llt(out.innovation_cov);
  if (llt.info() != Eigen::Success)
    throw NumericalFailure("kf1_update: innovation covariance is not positive definite");
  // K = P C^T S^{-1}  <=>  K^T = S^{-1} C P  (P and S symmetric)
  out.K = llt.solve(s.C * P_pred).transpose();
  const Matrix I = Matrix::Identity(P_pred.rows(), P_pred.cols());
  out.P_filt = symmetrize((I - out.K * s.C) * P_pred);
  return out;
}

}  // namespace

SensorFilter kf1_init(const SubsystemSpec& spec) {
  SensorFilter f;
  f.x_pred = spec.x0_mean;
  f.P_pred = spec.X0;
  f.x_filt = spec.x0_mean;
  f.P_filt = spec.X0;
  f.K = Matrix::Zero(spec.n(), spec.p());
  return f;
}

SensorFilter kf1_predict(const SubsystemSpec& spec, const SensorFilter& f, const Vector& u_prev) {
  require(f.x_filt.size() == spec.n(), "kf1_predict: estimate dimension mismatch");
  require(u_prev.size() == spec.m(), "kf1_predict: input dimension mismatch");
  SensorFilter out = f;
  out.x_pred = spec.A * f.x_filt + spec.B * u_prev;
  out.P_pred = predicted_covariance(spec, f.P_filt);
  return out;
}

SensorFilter kf1_update(const SubsystemSpec& spec, const SensorFilter& f, const Vector& y) {
  require(y.size() == spec.p(), "kf1_update: measurement dimension mismatch");
  require(f.x_pred.size() == spec.n(), "kf1_update: estimate dimension mismatch");
  const GainResult g = filter_gain(spec, f.P_pred);
  SensorFilter out = f;
  out.K = g.K;
  out.x_filt = f.x_pred + g.K * (y - spec.C * f.x_pred);
  out.P_filt = g.P_filt;
  return out;
}

ControllerEstimator kf2_init(const SubsystemSpec& spec) {
  return ControllerEstimator{spec.x0_mean};
}

ControllerEstimator kf2_advance(const SubsystemSpec& spec, const ControllerEstimator& c,
                                const Vector& u_prev) {
  require(c.x_hat.size() == spec.n(), "kf2_advance: estimate dimension mismatch");
  require(u_prev.size() == spec.m(), "kf2_advance: input dimension mismatch");
  return ControllerEstimator{spec.A * c.x_hat + spec.B * u_prev};
}

ControllerEstimator kf2_sync(const ControllerEstimator& /*c*/, const Vector& sensor_estimate) {
  return ControllerEstimator{sensor_estimate};
}

Vector error_vector(const SensorFilter& f, const ControllerEstimator& c) {
  require(f.x_filt.size() == c.x_hat.size(), "error_vector: dimension mismatch");
  return f.x_filt - c.x_hat;
}

FilterCovarianceSequence kf1_covariances(const SubsystemSpec& spec, int horizon) {
  require(horizon >= 1, "kf1_covariances: horizon must be positive");
  FilterCovarianceSequence seq;
  seq.P_pred.reserve(horizon);
  seq.P_filt.reserve(horizon);
  seq.K.reserve(horizon);
  seq.innovation_cov.reserve(horizon);
  Matrix P_pred = spec.X0;
  for (int t = 0; t < horizon; ++t) {
    if (t > 0) P_pred = predicted_covariance(spec, seq.P_filt.back());
    GainResult g = filter_gain(spec, P_pred);
    seq.P_pred.push_back(P_pred);
    seq.P_filt.push_back(std::move(g.P_filt));
    seq.K.push_back(std::move(g.K));
    seq.innovation_cov.push_back(std::move(g.innovation_cov));
  }
  return seq;
}

}  // namespace deepcas
