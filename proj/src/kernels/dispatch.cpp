#include <atomic>
#include <cmath>
#include <cstdlib>
#include <string>

#include "pulse/kernels.hpp"

namespace pulse::kernels {

#if defined(PULSE_HAVE_AVX2_TU)
const KernelTable* avx2_table_unchecked();
#endif

const KernelTable* avx2_table() {
#if defined(PULSE_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* initial_table() {
  if (const char* env = std::getenv("PULSE_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2" && avx2_table() != nullptr) return avx2_table();
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool select(std::string_view name) {
  if (name == "scalar") {
    current().store(&scalar_table(), std::memory_order_release);
    return true;
  }
  if (name == "avx2") {
    if (const KernelTable* t = avx2_table()) {
      current().store(t, std::memory_order_release);
      return true;
    }
  }
  return false;
}

double softmax_inplace(std::span<double> scores) {
  const KernelTable& k = active();
  const double m = k.max_value(scores.data(), scores.size());
  const double z = k.exp_shift_sum(scores.data(), m, scores.data(), scores.size());
  k.scale(scores.data(), 1.0 / z, scores.size());
  return m + std::log(z);
}

}  // namespace pulse::kernels
