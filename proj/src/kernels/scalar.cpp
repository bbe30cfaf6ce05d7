#include "deepcas/kernels/kernels.hpp"

#include <cmath>

namespace deepcas::kernels {
namespace {

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void relu_scalar(double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_scalar(const double* pre, double* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!(pre[i] > 0.0)) grad[i] = 0.0;
}

void adam_scalar(double* p, double* m, double* v, const double* g, std::size_t n,
                 const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_minus_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g[i] * g[i]);
    const double m_hat = m[i] / c.bias1;
    const double v_hat = v[i] / c.bias2;
    p[i] -= c.lr * (m_hat / (std::sqrt(v_hat) + c.eps));
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t{axpy_scalar, dot_scalar, relu_scalar, relu_mask_scalar,
                             adam_scalar};
  return t;
}

}  // namespace deepcas::kernels
