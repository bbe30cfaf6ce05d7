#pragma once

// Dense inner loops used by the Q-network. Each kernel has a scalar reference
// implementation and, on x86-64, an AVX2/FMA variant. The variant is picked
// once at startup from CPUID; DEEPCAS_SIMD=scalar|avx2 overrides the choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace deepcas::kernels {

enum class Level { scalar, avx2 };

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
};

struct KernelTable {
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  // x = max(x, 0)
  void (*relu)(double* x, std::size_t n);
  // grad[i] = 0 where pre[i] <= 0
  void (*relu_mask)(const double* pre, double* grad, std::size_t n);
  void (*adam)(double* param, double* m, double* v, const double* grad,
               std::size_t n, const AdamCoeffs& c);
};

const KernelTable& scalar_table();
#if defined(DEEPCAS_BUILD_AVX2)
const KernelTable& avx2_table();
#endif

bool supported(Level level);
const KernelTable& table(Level level);

Level active_level();
const KernelTable& active();
// Throws std::invalid_argument if the level is not supported on this CPU.
void set_active_level(Level level);

std::string_view level_name(Level level);
Level parse_level(std::string_view name);

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), y.size());
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

inline void relu(std::span<double> x) { active().relu(x.data(), x.size()); }

inline void relu_mask(std::span<const double> pre, std::span<double> grad) {
  active().relu_mask(pre.data(), grad.data(), grad.size());
}

inline void adam(std::span<double> param, std::span<double> m, std::span<double> v,
                 std::span<const double> grad, const AdamCoeffs& c) {
  active().adam(param.data(), m.data(), v.data(), grad.data(), param.size(), c);
}

}  // namespace deepcas::kernels
