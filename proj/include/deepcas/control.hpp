#pragma once

#include <vector>

#include "deepcas/estimation.hpp"
#include "deepcas/plant.hpp"

namespace deepcas {

// Finite-horizon LQ solution. S has T+1 entries (S[T] = Qf); L and Gamma
// have T entries, one per control stage t = 0..T-1.
struct GainSchedule {
  int horizon = 0;
  std::vector<Matrix> S;
  std::vector<Matrix> L;
  std::vector<Matrix> Gamma;  // L^T (B^T S_{t+1} B + R) L
};

inline constexpr double kMaxGainConditioning = 1e12;

GainSchedule riccati_backward(const SubsystemSpec& spec, int horizon);

// u_t = -L_t x^c_{t|t}
Vector control_action(const Matrix& L, const Vector& x_hat);

double stage_cost(const Vector& x, const Vector& u, const Matrix& Q, const Matrix& R);
double terminal_cost(const Vector& x, const Matrix& Qf);

// Expected loss with perfect communication (e == 0):
// x0' S0 x0 + Tr(S0 X0) + sum Tr(S_{t+1} W) + sum Tr(P_{t|t} Gamma_t).
double closed_form_baseline_loss(const SubsystemSpec& spec, const GainSchedule& gains,
                                 const FilterCovarianceSequence& kf);

// e' Gamma_t e
double error_loss_term(const Matrix& Gamma, const Vector& e);

}  // namespace deepcas
