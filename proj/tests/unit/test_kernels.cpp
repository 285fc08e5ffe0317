#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "pulse/kernels.hpp"

using namespace pulse;

namespace {

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}); }

struct ScopedKernels {
  explicit ScopedKernels(const char* name) : previous(kernels::active().name) { kernels::select(name); }
  ~ScopedKernels() { kernels::select(previous); }
  std::string_view previous;
};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar reference values") {
    const auto& k = kernels::scalar_table();
    const std::vector<double> x{1.0, -2.0, 3.5, 0.25};
    CHECK(k.max_value(x.data(), x.size()) == 3.5);
    CHECK(k.sum(x.data(), x.size()) == doctest::Approx(2.75));
    std::vector<double> out(4);
    const double z = k.exp_shift_sum(x.data(), 3.5, out.data(), 4);
    CHECK(out[2] == 1.0);
    CHECK(z == doctest::Approx(std::exp(-2.5) + std::exp(-5.5) + 1.0 + std::exp(-3.25)));
    std::vector<double> y{1, 1, 1, 1};
    k.axpy(2.0, x.data(), y.data(), 4);
    CHECK(y[1] == -3.0);
    CHECK(k.dot(x.data(), x.data(), 4) == doctest::Approx(1 + 4 + 12.25 + 0.0625));
  }

  TEST_CASE("avx2 matches scalar on random inputs") {
    const kernels::KernelTable* avx = kernels::avx2_table();
    if (avx == nullptr) {
      MESSAGE("AVX2 not available; equivalence test skipped");
      return;
    }
    const auto& s = kernels::scalar_table();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (std::size_t n = 0; n <= 67; ++n) {
      std::vector<double> x(n), y(n);
      for (auto& v : x) v = u(rng);
      for (auto& v : y) v = u(rng);
      if (n > 0) CHECK(avx->max_value(x.data(), n) == s.max_value(x.data(), n));
      CHECK(close(avx->sum(x.data(), n), s.sum(x.data(), n), 1e-12));
      CHECK(close(avx->dot(x.data(), y.data(), n), s.dot(x.data(), y.data(), n), 1e-12));
      const double shift = n ? s.max_value(x.data(), n) : 0.0;
      std::vector<double> a(n), b(n);
      const double za = avx->exp_shift_sum(x.data(), shift, a.data(), n);
      const double zb = s.exp_shift_sum(x.data(), shift, b.data(), n);
      CHECK(close(za, zb, 1e-13));
      for (std::size_t i = 0; i < n; ++i) CHECK(close(a[i], b[i], 1e-13));
      std::vector<double> ya = y, yb = y;
      avx->axpy(0.37, x.data(), ya.data(), n);
      s.axpy(0.37, x.data(), yb.data(), n);
      // The fused multiply-add skips one rounding of the product.
      for (std::size_t i = 0; i < n; ++i) CHECK(close(ya[i], yb[i], 1e-14));
      avx->scale(ya.data(), 1.5, n);
      s.scale(yb.data(), 1.5, n);
      for (std::size_t i = 0; i < n; ++i) CHECK(close(ya[i], yb[i], 1e-14));
    }
  }

  TEST_CASE("avx2 exp handles the extremes") {
    const kernels::KernelTable* avx = kernels::avx2_table();
    if (avx == nullptr) return;
    const std::vector<double> x{-800.0, -745.0, -700.0, 0.0, 1e-300, 700.0, -1e-12, 5.5};
    std::vector<double> out(x.size());
    avx->exp_shift_sum(x.data(), 0.0, out.data(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::isfinite(out[i]));
      CHECK(close(out[i], std::exp(x[i]), 1e-13));
    }
  }

  TEST_CASE("softmax normalizes and returns log Z under both tables") {
    for (const char* name : {"scalar", "avx2"}) {
      if (std::string_view(name) == "avx2" && kernels::avx2_table() == nullptr) continue;
      ScopedKernels scope(name);
      std::vector<double> s{1000.0, 999.0, 0.0, -1000.0, 998.5};
      const double log_z = kernels::softmax_inplace(s);
      double total = 0.0;
      for (double p : s) {
        CHECK(p >= 0.0);
        total += p;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(log_z == doctest::Approx(1000.0 + std::log(1.0 + std::exp(-1.0) + std::exp(-1.5))));
    }
  }

  TEST_CASE("table selection by name") {
    ScopedKernels scope("scalar");
    CHECK(kernels::active().name == "scalar");
    CHECK_FALSE(kernels::select("sse9"));
    CHECK(kernels::active().name == "scalar");
  }
}
