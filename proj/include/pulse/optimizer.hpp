#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "pulse/features.hpp"
#include "pulse/model.hpp"

namespace pulse {

enum class Algorithm { AdaGrad, AdaDelta };
std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::AdaGrad;
  double eta = 1.0;
  double igsav = 1e-10;  // initial squared-gradient accumulator (AdaGrad)
  double rho = 0.95;     // AdaDelta decay
  double epsilon = 1e-6; // AdaDelta conditioning
  std::size_t batch_size = 1;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  // Per-feature multipliers of lambda1 / lambda2; empty means 1 everywhere.
  std::vector<double> l1_factors;
  std::vector<double> l2_factors;
  // Training-set size the penalties are spread over; 0 = number of data.
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t max_epochs = 500;

  void validate() const;
};

enum class ConvergenceMode { LossOnly, ActiveOrLoss };

struct ConvergenceConfig {
  double gamma_loss = 5e-5;
  double tau_loss = 0.9;
  double gamma_active = 5e-3;
  double tau_active = 0.9;
  ConvergenceMode mode = ConvergenceMode::LossOnly;

  void validate() const;
};

// Per-feature optimizer state. `accum` is the AdaGrad sum of squared
// gradients or the AdaDelta E[g^2]; `accum_dx` is AdaDelta's E[dw^2].
// `u` is the total L1 penalty each weight could have received, `q` the signed
// penalty it actually received. `mark` is the value of `progress` when the
// feature's lazy penalties were last reconciled.
struct OptimizerState {
  std::vector<double> weights;
  std::vector<double> accum;
  std::vector<double> accum_dx;
  std::vector<double> u;
  std::vector<double> q;
  std::vector<double> mark;
  // Sum over steps of |batch| / N.
  double progress = 0.0;
  std::size_t steps = 0;
  std::size_t epochs = 0;

  std::size_t size() const { return weights.size(); }
  static OptimizerState fresh(std::size_t features, const OptimizerConfig& cfg);
  bool operator==(const OptimizerState&) const = default;
};

// Weights of the touched features before (w_mid) and after the L1 clip.
struct StepTrace {
  std::vector<std::uint32_t> index;
  std::vector<double> w_mid;
  std::vector<double> w_after;
};

// One mini-batch update of the features in `grad`.
void step(OptimizerState& state, const OptimizerConfig& cfg, const SparseGradient& grad, std::size_t batch_size,
          StepTrace* trace = nullptr);

// Applies the pending lazy L1/L2 penalty to every feature.
void reconcile_all(OptimizerState& state, const OptimizerConfig& cfg);

enum class StopReason { LossConverged, ActiveSetConverged, EpochCap };
std::string_view to_string(StopReason r);

struct RunResult {
  std::size_t epochs = 0;
  StopReason reason = StopReason::EpochCap;
  double mean_loss = 0.0;  // per-datum NLL over the last epoch
};

// Epochs of shuffled mini-batches until a convergence criterion fires or the
// epoch cap is reached. Deterministic for a given cfg.seed.
RunResult run(const FeatureMatrix& m, OptimizerState& state, const OptimizerConfig& cfg,
              const ConvergenceConfig& conv);

// Surviving features keep all their accumulators; kept[i] is the new index of
// old feature i or -1. New slots get fresh values with u = q = 0.
OptimizerState hot_start(const OptimizerState& prev, const std::vector<std::int64_t>& kept, std::size_t new_count,
                         const OptimizerConfig& cfg);

// Exponential moving average seeded with its first observation.
class Ema {
 public:
  explicit Ema(double tau) : tau_(tau) {}
  double push(double x);
  double value() const { return value_; }
  bool empty() const { return !seeded_; }

 private:
  double tau_;
  double value_ = 0.0;
  bool seeded_ = false;
};

}  // namespace pulse
