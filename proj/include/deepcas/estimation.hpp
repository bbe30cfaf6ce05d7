#pragma once

#include <vector>

#include "deepcas/plant.hpp"

namespace deepcas {

// Kalman filter (I): the sensor-side MMSE estimator.
struct SensorFilter {
  Vector x_pred;  // x^s_{t|t-1}
  Matrix P_pred;  // P^s_{t|t-1}
  Vector x_filt;  // x^s_{t|t}
  Matrix P_filt;  // P^s_{t|t}
  Matrix K;       // gain used by the latest update
};

// Kalman filter (II): the controller-side open-loop predictor. The smart
// sensor keeps an identical copy, so one instance per loop suffices.
struct ControllerEstimator {
  Vector x_hat;
};

SensorFilter kf1_init(const SubsystemSpec& spec);
SensorFilter kf1_predict(const SubsystemSpec& spec, const SensorFilter& f, const Vector& u_prev);
// Throws NumericalFailure if the innovation covariance is not positive definite.
SensorFilter kf1_update(const SubsystemSpec& spec, const SensorFilter& f, const Vector& y);

ControllerEstimator kf2_init(const SubsystemSpec& spec);
ControllerEstimator kf2_advance(const SubsystemSpec& spec, const ControllerEstimator& c,
                                const Vector& u_prev);
ControllerEstimator kf2_sync(const ControllerEstimator& c, const Vector& sensor_estimate);

// e_{t|t} = x^s_{t|t} - x^c_{t|t}
Vector error_vector(const SensorFilter& f, const ControllerEstimator& c);

// Covariance recursion of Kalman filter (I) does not depend on data; this is
// the dry run over stages 0..T-1 (no prediction at t = 0).
struct FilterCovarianceSequence {
  std::vector<Matrix> P_pred;
  std::vector<Matrix> P_filt;
  std::vector<Matrix> K;
  std::vector<Matrix> innovation_cov;  // C P_pred C^T + V
};

FilterCovarianceSequence kf1_covariances(const SubsystemSpec& spec, int horizon);

}  // namespace deepcas
