#pragma once

// Dense inner loops over outcome-sized vectors. Each kernel has a scalar
// reference implementation and, where the CPU supports it, an AVX2 variant.
// The active table is chosen once at startup; PULSE_KERNELS=scalar|avx2
// overrides the choice.

#include <cstddef>
#include <span>
#include <string_view>

namespace pulse::kernels {

struct KernelTable {
  std::string_view name;
  double (*max_value)(const double* x, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // out[i] = exp(x[i] - shift); returns the sum of out.
  double (*exp_shift_sum)(const double* x, double shift, double* out, std::size_t n);
  void (*scale)(double* x, double factor, std::size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
};

const KernelTable& scalar_table();
// Null when the AVX2 translation unit is not built or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

const KernelTable& active();
// Forces a table by name ("scalar", "avx2"); returns false if unavailable.
bool select(std::string_view name);

inline double max_value(std::span<const double> x) { return active().max_value(x.data(), x.size()); }
inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }
inline double exp_shift_sum(std::span<const double> x, double shift, std::span<double> out) {
  return active().exp_shift_sum(x.data(), shift, out.data(), x.size());
}
inline void scale(std::span<double> x, double factor) { active().scale(x.data(), factor, x.size()); }
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x.data(), y.data(), x.size());
}
inline double dot(std::span<const double> x, std::span<const double> y) {
  return active().dot(x.data(), y.data(), x.size());
}

// Normalizes scores in place into a probability vector (max-shifted softmax)
// and returns log of the partition function.
double softmax_inplace(std::span<double> scores);

}  // namespace pulse::kernels
