#include "pulse/kernels.hpp"

#include <cmath>
#include <limits>

namespace pulse::kernels {
namespace {

double max_value_scalar(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double exp_shift_sum_scalar(const double* x, double shift, double* out, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - shift);
    s += out[i];
  }
  return s;
}

void scale_scalar(double* x, double factor, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= factor;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

constexpr KernelTable kScalar{
    "scalar", max_value_scalar, sum_scalar, exp_shift_sum_scalar, scale_scalar, axpy_scalar, dot_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace pulse::kernels
