#include "pulse/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "pulse/error.hpp"

namespace pulse {
namespace {

double factor(const std::vector<double>& factors, std::size_t i) { return factors.empty() ? 1.0 : factors[i]; }

// Current per-feature learning rate |dw / g| implied by the accumulators.
double rate(const OptimizerState& s, const OptimizerConfig& cfg, std::size_t i) {
  if (cfg.algorithm == Algorithm::AdaGrad) return cfg.eta / std::sqrt(s.accum[i]);
  return cfg.eta * std::sqrt(s.accum_dx[i] + cfg.epsilon) / std::sqrt(s.accum[i] + cfg.epsilon);
}

void clip(OptimizerState& s, std::size_t i) {
  const double z = s.weights[i];
  if (z > 0.0) {
    s.weights[i] = std::max(0.0, z - (s.u[i] + s.q[i]));
  } else if (z < 0.0) {
    s.weights[i] = std::min(0.0, z + (s.u[i] - s.q[i]));
  }
  s.q[i] += s.weights[i] - z;
}

void check_sizes(const OptimizerState& s, const OptimizerConfig& cfg) {
  if (!cfg.l1_factors.empty() && cfg.l1_factors.size() != s.size()) {
    throw std::invalid_argument("l1_factors size does not match the feature count");
  }
  if (!cfg.l2_factors.empty() && cfg.l2_factors.size() != s.size()) {
    throw std::invalid_argument("l2_factors size does not match the feature count");
  }
}

}  // namespace

std::string_view to_string(Algorithm a) { return a == Algorithm::AdaGrad ? "adagrad" : "adadelta"; }

Algorithm parse_algorithm(std::string_view text) {
  if (text == "adagrad") return Algorithm::AdaGrad;
  if (text == "adadelta") return Algorithm::AdaDelta;
  throw std::invalid_argument("unknown optimizer '" + std::string(text) + "'");
}

void OptimizerConfig::validate() const {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(igsav > 0.0)) throw std::invalid_argument("igsav must be > 0");
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must be in (0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("lambda1/lambda2 must be >= 0");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
}

void ConvergenceConfig::validate() const {
  if (!(gamma_loss > 0.0) || !(gamma_active > 0.0)) throw std::invalid_argument("convergence thresholds must be > 0");
  if (!(tau_loss > 0.0 && tau_loss < 1.0) || !(tau_active > 0.0 && tau_active < 1.0)) {
    throw std::invalid_argument("EMA decays must be in (0, 1)");
  }
}

OptimizerState OptimizerState::fresh(std::size_t features, const OptimizerConfig& cfg) {
  OptimizerState s;
  s.weights.assign(features, 0.0);
  s.accum.assign(features, cfg.algorithm == Algorithm::AdaGrad ? cfg.igsav : 0.0);
  s.accum_dx.assign(features, 0.0);
  s.u.assign(features, 0.0);
  s.q.assign(features, 0.0);
  s.mark.assign(features, 0.0);
  return s;
}

void step(OptimizerState& s, const OptimizerConfig& cfg, const SparseGradient& grad, std::size_t batch_size,
          StepTrace* trace) {
  const double n = static_cast<double>(cfg.n);
  if (!(n > 0.0)) throw std::invalid_argument("step: training-set size N must be set");
  const double frac = static_cast<double>(batch_size) / n;
  if (trace) {
    trace->index = grad.index;
    trace->w_mid.clear();
    trace->w_after.clear();
  }
  for (std::size_t k = 0; k < grad.size(); ++k) {
    const std::size_t i = grad.index[k];
    double g = grad.value[k];
    if (!std::isfinite(g)) {
      throw NumericError("non-finite gradient for feature " + std::to_string(i) + " at step " +
                         std::to_string(s.steps));
    }
    const double l1 = cfg.lambda1 * factor(cfg.l1_factors, i);
    const double l2 = cfg.lambda2 * factor(cfg.l2_factors, i);
    // Penalty owed for the steps in which this feature did not fire.
    const double pending = s.progress - s.mark[i];
    if (l1 > 0.0 && pending > 0.0) s.u[i] += l1 * pending * rate(s, cfg, i);
    g += l2 * s.weights[i] * (pending + frac);

    double dw = 0.0;
    if (cfg.algorithm == Algorithm::AdaGrad) {
      s.accum[i] += g * g;
      dw = -cfg.eta * g / std::sqrt(s.accum[i]);
    } else {
      s.accum[i] = cfg.rho * s.accum[i] + (1.0 - cfg.rho) * g * g;
      dw = -cfg.eta * std::sqrt(s.accum_dx[i] + cfg.epsilon) / std::sqrt(s.accum[i] + cfg.epsilon) * g;
      s.accum_dx[i] = cfg.rho * s.accum_dx[i] + (1.0 - cfg.rho) * dw * dw;
    }
    const double eta_eff = g != 0.0 ? std::abs(dw / g) : rate(s, cfg, i);
    s.weights[i] += dw;
    if (trace) trace->w_mid.push_back(s.weights[i]);
    if (l1 > 0.0) {
      s.u[i] += l1 * frac * eta_eff;
      clip(s, i);
    }
    if (trace) trace->w_after.push_back(s.weights[i]);
    s.mark[i] = s.progress + frac;
  }
  s.progress += frac;
  ++s.steps;
}

void reconcile_all(OptimizerState& s, const OptimizerConfig& cfg) {
  check_sizes(s, cfg);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double pending = s.progress - s.mark[i];
    if (pending <= 0.0) continue;
    const double l1 = cfg.lambda1 * factor(cfg.l1_factors, i);
    const double l2 = cfg.lambda2 * factor(cfg.l2_factors, i);
    if (l2 > 0.0 && s.weights[i] != 0.0) {
      // Gradient step on the owed L2 term alone, at the current rate.
      s.weights[i] -= rate(s, cfg, i) * l2 * s.weights[i] * pending;
    }
    if (l1 > 0.0) {
      s.u[i] += l1 * pending * rate(s, cfg, i);
      clip(s, i);
    }
    s.mark[i] = s.progress;
  }
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::LossConverged: return "loss";
    case StopReason::ActiveSetConverged: return "active_set";
    case StopReason::EpochCap: return "epoch_cap";
  }
  return "?";
}

double Ema::push(double x) {
  value_ = seeded_ ? tau_ * value_ + (1.0 - tau_) * x : x;
  seeded_ = true;
  return value_;
}

RunResult run(const FeatureMatrix& m, OptimizerState& state, const OptimizerConfig& cfg_in,
              const ConvergenceConfig& conv) {
  if (m.data() == 0) throw std::invalid_argument("optimizer run: no data");
  if (state.size() != m.features()) throw std::invalid_argument("optimizer run: state/matrix feature mismatch");
  OptimizerConfig cfg = cfg_in;
  if (cfg.n == 0) cfg.n = m.data();
  cfg.validate();
  conv.validate();
  check_sizes(state, cfg);

  std::vector<std::size_t> order(m.data());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(state.epochs)};
  std::mt19937_64 rng(seq);

  GradientWorkspace ws;
  Ema loss_ema(conv.tau_loss);
  Ema active_ema(conv.tau_active);
  std::vector<std::uint8_t> active(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) active[i] = state.weights[i] != 0.0;

  RunResult result;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double nll = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + b, e - b);
      const SparseGradient g = gradient(m, state.weights, batch, ws);
      nll += g.nll;
      step(state, cfg, g, batch.size());
    }
    ++state.epochs;
    result.epochs = epoch;
    result.mean_loss = nll / static_cast<double>(m.data());
    if (!std::isfinite(result.mean_loss)) throw NumericError("non-finite training loss");

    std::size_t changed = 0;
    for (std::size_t i = 0; i < state.size(); ++i) {
      const std::uint8_t now = state.weights[i] != 0.0;
      changed += now != active[i];
      active[i] = now;
    }
    const double active_value = active_ema.push(static_cast<double>(changed));
    const bool had_loss = !loss_ema.empty();
    const double prev_loss = loss_ema.value();
    const double loss_value = loss_ema.push(result.mean_loss);

    if (conv.mode == ConvergenceMode::ActiveOrLoss && active_value < conv.gamma_active) {
      result.reason = StopReason::ActiveSetConverged;
      break;
    }
    if (had_loss && std::abs(loss_value - prev_loss) < conv.gamma_loss) {
      result.reason = StopReason::LossConverged;
      break;
    }
    result.reason = StopReason::EpochCap;
  }
  reconcile_all(state, cfg);
  return result;
}

OptimizerState hot_start(const OptimizerState& prev, const std::vector<std::int64_t>& kept, std::size_t new_count,
                         const OptimizerConfig& cfg) {
  if (kept.size() != prev.size()) throw std::invalid_argument("hot_start: index map size mismatch");
  OptimizerState s = OptimizerState::fresh(new_count, cfg);
  s.progress = prev.progress;
  s.steps = prev.steps;
  s.epochs = prev.epochs;
  std::fill(s.mark.begin(), s.mark.end(), prev.progress);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i] < 0) continue;
    const auto j = static_cast<std::size_t>(kept[i]);
    if (j >= new_count) throw std::invalid_argument("hot_start: new index out of range");
    s.weights[j] = prev.weights[i];
    s.accum[j] = prev.accum[i];
    s.accum_dx[j] = prev.accum_dx[i];
    s.u[j] = prev.u[i];
    s.q[j] = prev.q[i];
    s.mark[j] = prev.mark[i];
  }
  return s;
}

}  // namespace pulse
