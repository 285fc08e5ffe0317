#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pulse/corpus.hpp"
#include "pulse/features.hpp"
#include "pulse/model.hpp"
#include "pulse/nplus.hpp"
#include "pulse/optimizer.hpp"

namespace pulse {

enum class RegKind { Constant, Linear, LinearNoZero, Polynomial, Exponential, ExponentialWithZero };
std::string_view to_string(RegKind k);
RegKind parse_reg_kind(std::string_view text);

// rho(Delta) for the given kind and alpha.
double regularization_factor(RegKind kind, double alpha, int delta);
// rho(f) with Delta = max sigma of f.
double per_feature_factor(const CompoundFeature& f, RegKind kind, double alpha);
// lambda_init * exp(-t / tau)
double decayed_lambda(double lambda_init, double t, double tau);

struct RegularizationSpec {
  RegKind l1_kind = RegKind::Exponential;
  double l1_alpha = 2.0;
  RegKind l2_kind = RegKind::Constant;
  double l2_alpha = 1.0;
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  // Temporal decay of lambda1 / lambda2 (short-term model only).
  bool decay = false;
  double tau1 = 100.0;
  double tau2 = 100.0;

  void validate() const;
  bool operator==(const RegularizationSpec&) const = default;
};

enum class OuterCriterion { Fluctuation, SetSize, ValidationEma };
std::string_view to_string(OuterCriterion c);
OuterCriterion parse_outer_criterion(std::string_view text);

struct OuterConvergence {
  OuterCriterion criterion = OuterCriterion::Fluctuation;
  double gamma = 0.01;
  double tau = 0.9;
  std::size_t max_iterations = 50;
  double validation_fraction = 0.1;

  void validate() const;
};

// |symmetric difference| of two feature sets (features only).
std::size_t symmetric_difference(const FeatureSet& a, const FeatureSet& b);
// Criterion (a): |F_j xor F_{j-1}| < gamma * |F_j|; two empty sets converge.
bool fluctuation_converged(const FeatureSet& current, const FeatureSet& previous, double gamma);
// Criterion (b): | |F_j| - |F_{j-1}| | < gamma * |F_j|; two empty sets converge.
bool set_size_converged(std::size_t current, std::size_t previous, double gamma);

struct TrainedModel {
  FeatureSet features;
  std::vector<int> alphabet;
  NPlusSpec spec;
  Expansion expansion = Expansion::Backwards;
  RegularizationSpec reg;
  KeyProfiles profiles;
  bool duration_weighted_key = true;
  bool converged = true;
  // Provenance.
  std::string corpus_hash;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t iterations = 0;
};

struct LtmConfig {
  NPlusSpec spec = NPlusSpec::parse("P I* C* K M_K");
  Expansion expansion = Expansion::Backwards;
  RegularizationSpec reg;
  OptimizerConfig opt;
  ConvergenceConfig conv{.mode = ConvergenceMode::ActiveOrLoss};
  OuterConvergence outer;
  // 0 disables the cap.
  std::size_t feature_cap = 2000;
  // Test hook: keep zero-weight features.
  bool shrink = true;
  std::size_t threads = 1;
  KeyProfiles profiles = KeyProfiles::shipped();
  bool duration_weighted_key = true;
};

struct IterationLog {
  std::size_t iteration = 0;
  std::size_t candidates = 0;  // relevant candidates added by GROW
  std::size_t features = 0;    // after SHRINK
  std::size_t changed = 0;     // symmetric difference to the previous set
  double objective = 0.0;      // mean training NLL, nats
  double validation_bits = -1.0;
  std::size_t epochs = 0;
  StopReason inner = StopReason::EpochCap;
};

enum class OuterStop { Converged, IterationCap, FeatureCap };
std::string_view to_string(OuterStop s);

struct LtmResult {
  TrainedModel model;
  std::vector<IterationLog> log;
  OuterStop stop = OuterStop::Converged;
};

LtmResult fit_ltm(const Corpus& corpus, const LtmConfig& cfg);

struct StmConfig {
  NPlusSpec spec = NPlusSpec::parse("P I* F1");
  Expansion expansion = Expansion::Forwards;
  RegularizationSpec reg{.l1_kind = RegKind::Exponential,
                         .l1_alpha = 1.2,
                         .lambda1 = 0.5,
                         .lambda2 = 0.05,
                         .decay = true,
                         .tau1 = 100.0,
                         .tau2 = 100.0};
  OptimizerConfig opt;
  ConvergenceConfig conv{.mode = ConvergenceMode::ActiveOrLoss};
  bool shrink = true;
};

// Online model over one sequence: the prediction for event t uses only
// events 0..t-1 (t = 0 is uniform). Specs with key-dependent viewpoints
// are rejected.
std::vector<PredictiveDistribution> fit_predict_stm(const EventSequence& seq, const std::vector<int>& alphabet,
                                                    const StmConfig& cfg);

// Dataset over the model's alphabet; keys estimated with the model's
// profiles when its features need them.
Dataset make_dataset(const TrainedModel& model, const Corpus& corpus);
// One distribution per event for every sequence.
std::vector<std::vector<PredictiveDistribution>> predict_corpus(const TrainedModel& model, const Corpus& corpus,
                                                                std::size_t threads = 1);
// p(next | prefix) for a melody with uniform quarter-note durations in 4/4.
PredictiveDistribution predict_next(const TrainedModel& model, std::span<const int> prefix,
                                    const std::optional<KeyEstimate>& key);

std::string corpus_hash(const Corpus& corpus);

}  // namespace pulse
