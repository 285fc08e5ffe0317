#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "pulse/error.hpp"
#include "pulse/optimizer.hpp"
#include "support/fixtures.hpp"

using namespace pulse;

namespace {

SparseGradient single(std::uint32_t i, double g) {
  SparseGradient s;
  s.index = {i};
  s.value = {g};
  return s;
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("first AdaGrad step has the closed form") {
    OptimizerConfig cfg;
    cfg.n = 10;
    auto s = OptimizerState::fresh(2, cfg);
    step(s, cfg, single(1, 0.5), 1);
    CHECK(s.weights[0] == 0.0);
    CHECK(s.weights[1] == doctest::Approx(-0.5 / std::sqrt(1e-10 + 0.25)));
    CHECK(s.accum[1] == doctest::Approx(0.25 + 1e-10));
    CHECK(s.progress == doctest::Approx(0.1));
    CHECK(s.steps == 1);
  }

  TEST_CASE("first AdaDelta step has the closed form") {
    OptimizerConfig cfg;
    cfg.algorithm = Algorithm::AdaDelta;
    cfg.n = 4;
    auto s = OptimizerState::fresh(1, cfg);
    const double g = 2.0;
    step(s, cfg, single(0, g), 1);
    const double eg2 = 0.05 * g * g;
    const double dw = -std::sqrt(1e-6) / std::sqrt(eg2 + 1e-6) * g;
    CHECK(s.weights[0] == doctest::Approx(dw).epsilon(1e-12));
    CHECK(s.accum_dx[0] == doctest::Approx(0.05 * dw * dw).epsilon(1e-12));
  }

  TEST_CASE("non-finite gradients raise a numeric error") {
    OptimizerConfig cfg;
    cfg.n = 1;
    auto s = OptimizerState::fresh(1, cfg);
    CHECK_THROWS_AS(step(s, cfg, single(0, std::nan("")), 1), NumericError);
    cfg.n = 0;
    CHECK_THROWS_AS(step(s, cfg, single(0, 1.0), 1), std::invalid_argument);
  }

  TEST_CASE("the L1 clip never pushes a weight across zero") {
    std::mt19937_64 rng(11);
    OptimizerConfig cfg;
    cfg.lambda1 = 2.0;
    cfg.n = 5;
    std::normal_distribution<double> g(0.0, 1.0);
    auto s = OptimizerState::fresh(3, cfg);
    StepTrace trace;
    for (int i = 0; i < 500; ++i) {
      SparseGradient grad;
      for (std::uint32_t f = 0; f < 3; ++f) {
        if (rng() % 2) {
          grad.index.push_back(f);
          grad.value.push_back(g(rng));
        }
      }
      step(s, cfg, grad, 1, &trace);
      for (std::size_t k = 0; k < trace.index.size(); ++k) {
        CHECK(trace.w_mid[k] * trace.w_after[k] >= 0.0);
        CHECK(std::abs(trace.w_after[k]) <= std::abs(trace.w_mid[k]));
      }
    }
    // q never exceeds the total penalty u in magnitude.
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(s.q[i]) <= s.u[i] + 1e-12);
  }

  TEST_CASE("a strong L1 penalty zeroes weights with weak gradients") {
    OptimizerConfig cfg;
    cfg.lambda1 = 10.0;
    cfg.n = 1;
    auto s = OptimizerState::fresh(1, cfg);
    for (int i = 0; i < 20; ++i) step(s, cfg, single(0, 0.3), 1);
    CHECK(s.weights[0] == 0.0);
  }

  TEST_CASE("lazy penalties equal the penalty applied every step") {
    // Feature 1 fires every step, feature 0 only on the first and last.
    // With a fixed rate (full accumulator) the owed u must equal the sum of
    // per-step contributions.
    OptimizerConfig cfg;
    cfg.lambda1 = 0.01;
    cfg.n = 4;
    auto lazy = OptimizerState::fresh(2, cfg);
    lazy.accum = {1e12, 1e12};
    step(lazy, cfg, single(0, 1.0), 1);
    for (int i = 0; i < 6; ++i) step(lazy, cfg, single(1, 1.0), 1);
    const double rate_before = 1.0 / std::sqrt(lazy.accum[0]);
    const double u_before = lazy.u[0];
    step(lazy, cfg, single(0, 1.0), 1);
    const double owed = 0.01 * (6.0 / 4.0) * rate_before;
    const double own = 0.01 * 0.25 * (1.0 / std::sqrt(lazy.accum[0]));
    CHECK(lazy.u[0] == doctest::Approx(u_before + owed + own).epsilon(1e-12));
    reconcile_all(lazy, cfg);
    CHECK(lazy.mark[0] == lazy.progress);
    CHECK(lazy.mark[1] == lazy.progress);
  }

  TEST_CASE("hot start keeps survivors and gives new features clean slates") {
    OptimizerConfig cfg;
    cfg.lambda1 = 0.5;
    cfg.n = 2;
    auto s = OptimizerState::fresh(3, cfg);
    step(s, cfg, single(0, 1.0), 1);
    step(s, cfg, single(2, -1.0), 1);
    const auto h = hot_start(s, {1, -1, 0}, 4, cfg);
    CHECK(h.size() == 4);
    CHECK(h.weights[1] == s.weights[0]);
    CHECK(h.u[1] == s.u[0]);
    CHECK(h.mark[1] == s.mark[0]);
    CHECK(h.weights[0] == s.weights[2]);
    CHECK(h.accum[0] == s.accum[2]);
    CHECK(h.progress == s.progress);
    CHECK(h.steps == s.steps);
    for (std::size_t j : {2u, 3u}) {
      CHECK(h.weights[j] == 0.0);
      CHECK(h.u[j] == 0.0);
      CHECK(h.q[j] == 0.0);
      CHECK(h.accum[j] == cfg.igsav);
      CHECK(h.mark[j] == s.progress);
    }
    CHECK_THROWS_AS(hot_start(s, {0, 1}, 3, cfg), std::invalid_argument);
    CHECK_THROWS_AS(hot_start(s, {0, 1, 5}, 3, cfg), std::invalid_argument);
  }

  TEST_CASE("identity hot start followed by training matches uninterrupted training") {
    std::mt19937_64 rng(5);
    const auto m = testing::random_matrix(rng, 30, 5, 3);
    OptimizerConfig cfg;
    cfg.lambda1 = 0.05;
    cfg.max_epochs = 3;
    ConvergenceConfig conv;
    conv.gamma_loss = 1e-300;
    auto a = OptimizerState::fresh(5, cfg);
    run(m, a, cfg, conv);
    auto b = hot_start(a, {0, 1, 2, 3, 4}, 5, cfg);
    CHECK(b == a);
  }

  TEST_CASE("runs are reproducible for a seed and differ across seeds") {
    std::mt19937_64 rng(6);
    const auto m = testing::random_matrix(rng, 50, 8, 4);
    OptimizerConfig cfg;
    cfg.lambda1 = 0.01;
    cfg.max_epochs = 5;
    cfg.seed = 9;
    ConvergenceConfig conv;
    auto a = OptimizerState::fresh(8, cfg);
    auto b = OptimizerState::fresh(8, cfg);
    const auto ra = run(m, a, cfg, conv);
    const auto rb = run(m, b, cfg, conv);
    CHECK(a == b);
    CHECK(ra.mean_loss == rb.mean_loss);
    cfg.seed = 10;
    auto c = OptimizerState::fresh(8, cfg);
    run(m, c, cfg, conv);
    CHECK(c.weights != a.weights);
  }

  TEST_CASE("training lowers the objective and respects the epoch cap") {
    std::mt19937_64 rng(7);
    const auto m = testing::random_matrix(rng, 80, 10, 4);
    OptimizerConfig cfg;
    cfg.max_epochs = 4;
    ConvergenceConfig conv;
    conv.gamma_loss = 1e-300;
    auto s = OptimizerState::fresh(10, cfg);
    const double before = objective(m, s.weights).nll;
    const auto r = run(m, s, cfg, conv);
    CHECK(r.epochs == 4);
    CHECK(r.reason == StopReason::EpochCap);
    CHECK(s.epochs == 4);
    CHECK(objective(m, s.weights).nll < before);
  }

  TEST_CASE("the active-set criterion can stop training early") {
    std::mt19937_64 rng(8);
    const auto m = testing::random_matrix(rng, 40, 6, 3);
    OptimizerConfig cfg;
    cfg.lambda1 = 1000.0;
    ConvergenceConfig conv;
    conv.mode = ConvergenceMode::ActiveOrLoss;
    auto s = OptimizerState::fresh(6, cfg);
    const auto r = run(m, s, cfg, conv);
    CHECK(r.reason == StopReason::ActiveSetConverged);
    CHECK(r.epochs == 1);
    for (double w : s.weights) CHECK(w == 0.0);
  }

  TEST_CASE("EMA is seeded by its first value") {
    Ema e(0.9);
    CHECK(e.empty());
    CHECK(e.push(10.0) == 10.0);
    CHECK(e.push(0.0) == doctest::Approx(9.0));
    CHECK_FALSE(e.empty());
  }

  TEST_CASE("configuration validation") {
    OptimizerConfig cfg;
    cfg.eta = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.rho = 1.0;
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.lambda1 = -1.0;
    CHECK_THROWS(cfg.validate());
    ConvergenceConfig conv;
    conv.tau_loss = 1.0;
    CHECK_THROWS(conv.validate());
    CHECK(to_string(StopReason::ActiveSetConverged) == "active_set");
  }
}
