#include <cstdlib>
#include <stdexcept>
#include <string>

#include "deepcas/kernels/kernels.hpp"

namespace deepcas::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(DEEPCAS_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Level detect() {
  if (const char* forced = std::getenv("DEEPCAS_SIMD"); forced != nullptr && *forced != '\0') {
    const Level level = parse_level(forced);
    if (!supported(level))
      throw std::invalid_argument(std::string("DEEPCAS_SIMD=") + forced +
                                  " is not supported on this CPU");
    return level;
  }
  return supported(Level::avx2) ? Level::avx2 : Level::scalar;
}

Level& current() {
  static Level level = detect();
  return level;
}

}  // namespace

bool supported(Level level) {
  switch (level) {
    case Level::scalar:
      return true;
    case Level::avx2: {
      static const bool has = cpu_has_avx2();
      return has;
    }
  }
  return false;
}

const KernelTable& table(Level level) {
  if (!supported(level))
    throw std::invalid_argument("SIMD level not supported: " + std::string(level_name(level)));
#if defined(DEEPCAS_BUILD_AVX2)
  if (level == Level::avx2) return avx2_table();
#endif
  return scalar_table();
}

Level active_level() { return current(); }

const KernelTable& active() {
  static thread_local const KernelTable* cached = nullptr;
  static thread_local Level cached_level = Level::scalar;
  if (cached == nullptr || cached_level != current()) {
    cached_level = current();
    cached = &table(cached_level);
  }
  return *cached;
}

void set_active_level(Level level) {
  if (!supported(level))
    throw std::invalid_argument("SIMD level not supported: " + std::string(level_name(level)));
  current() = level;
}

std::string_view level_name(Level level) {
  return level == Level::avx2 ? "avx2" : "scalar";
}

Level parse_level(std::string_view name) {
  if (name == "scalar") return Level::scalar;
  if (name == "avx2") return Level::avx2;
  throw std::invalid_argument("unknown SIMD level '" + std::string(name) + "'");
}

}  // namespace deepcas::kernels
