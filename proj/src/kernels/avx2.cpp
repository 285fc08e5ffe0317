// AVX2 + FMA variants. Compiled with -mavx2 -mfma; only reached after a
// runtime CPU check in dispatch.cpp.

#include "pulse/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace pulse::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, sh));
}

// Cephes-style exp: x = n*ln2 + r, exp(r) from a Pade form, then 2^n via the
// exponent bits. Results are within a few ulp of std::exp on [-708, 709].
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125E-1), x);
  x = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212E-6), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(1.26177193074810590878E-4);
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(3.02994407707441961300E-2));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042E-6);
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.52448340349684104192E-3));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

  // 2^n assembled in the exponent field.
  const __m128i ni = _mm256_cvtpd_epi32(n);
  __m256i e = _mm256_cvtepi32_epi64(ni);
  e = _mm256_add_epi64(e, _mm256_set1_epi64x(1023));
  e = _mm256_slli_epi64(e, 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(e));
  return _mm256_andnot_pd(underflow, r);
}

double max_value_avx2(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    m = hmax(acc);
  }
  for (; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double exp_shift_sum_avx2(const double* x, double shift, double* out, std::size_t n) {
  const __m256d sh = _mm256_set1_pd(shift);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), sh));
    _mm256_storeu_pd(out + i, v);
    acc = _mm256_add_pd(acc, v);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    out[i] = std::exp(x[i] - shift);
    s += out[i];
  }
  return s;
}

void scale_avx2(double* x, double factor, std::size_t n) {
  const __m256d f = _mm256_set1_pd(factor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), f));
  for (; i < n; ++i) x[i] *= factor;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

constexpr KernelTable kAvx2{
    "avx2", max_value_avx2, sum_avx2, exp_shift_sum_avx2, scale_avx2, axpy_avx2, dot_avx2,
};

}  // namespace

const KernelTable* avx2_table_unchecked() { return &kAvx2; }

}  // namespace pulse::kernels
