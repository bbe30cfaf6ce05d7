#include "deepcas/control.hpp"

#include "deepcas/errors.hpp"

namespace deepcas {

GainSchedule riccati_backward(const SubsystemSpec& spec, int horizon) {
  require(horizon >= 1, "riccati_backward: horizon must be positive");
  const Matrix& A = spec.A;
  const Matrix& B = spec.B;

  GainSchedule g;
  g.horizon = horizon;
  g.S.resize(horizon + 1);
  g.L.resize(horizon);
  g.Gamma.resize(horizon);
  g.S[horizon] = spec.Qf;

  for (int t = horizon - 1; t >= 0; --t) {
    const Matrix& S_next = g.S[t + 1];
    Matrix M = B.transpose() * S_next * B + spec.R;
    M = 0.5 * (M + M.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxGainConditioning)
      throw NumericalFailure("riccati_backward: B'SB + R is ill-conditioned at stage " +
                             std::to_string(t));

    Eigen::LLT<Matrix> llt(M);
    g.L[t] = llt.solve(B.transpose() * S_next * A);
    Matrix S = A.transpose() * S_next * A + spec.Q - A.transpose() * S_next * B * g.L[t];
    g.S[t] = 0.5 * (S + S.transpose());
    Matrix Gamma = g.L[t].transpose() * M * g.L[t];
    g.Gamma[t] = 0.5 * (Gamma + Gamma.transpose());
  }
  return g;
}

Vector control_action(const Matrix& L, const Vector& x_hat) {
  require(L.cols() == x_hat.size(), "control_action: dimension mismatch");
  return -(L * x_hat);
}

double stage_cost(const Vector& x, const Vector& u, const Matrix& Q, const Matrix& R) {
  require(Q.rows() == x.size() && Q.cols() == x.size(), "stage_cost: Q dimension mismatch");
  require(R.rows() == u.size() && R.cols() == u.size(), "stage_cost: R dimension mismatch");
  return x.dot(Q * x) + u.dot(R * u);
}

double terminal_cost(const Vector& x, const Matrix& Qf) {
  require(Qf.rows() == x.size() && Qf.cols() == x.size(), "terminal_cost: dimension mismatch");
  return x.dot(Qf * x);
}

double closed_form_baseline_loss(const SubsystemSpec& spec, const GainSchedule& gains,
                                 const FilterCovarianceSequence& kf) {
  const int T = gains.horizon;
  require(static_cast<int>(kf.P_filt.size()) >= T,
          "closed_form_baseline_loss: covariance sequence shorter than horizon");
  double loss = spec.x0_mean.dot(gains.S[0] * spec.x0_mean) + (gains.S[0] * spec.X0).trace();
  for (int t = 0; t < T; ++t) loss += (gains.S[t + 1] * spec.W).trace();
  for (int t = 0; t < T; ++t) loss += (kf.P_filt[t] * gains.Gamma[t]).trace();
  return loss;
}

double error_loss_term(const Matrix& Gamma, const Vector& e) {
  require(Gamma.rows() == e.size() && Gamma.cols() == e.size(),
          "error_loss_term: dimension mismatch");
  return e.dot(Gamma * e);
}

}  // namespace deepcas
