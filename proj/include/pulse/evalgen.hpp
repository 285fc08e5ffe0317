#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pulse/corpus.hpp"
#include "pulse/ensemble.hpp"
#include "pulse/model.hpp"
#include "pulse/pulse.hpp"

namespace pulse {

// Position (sequence index, event index) of a true event that got p = 0.
struct ZeroPosition {
  std::size_t sequence = 0;
  std::size_t t = 0;
  bool operator==(const ZeroPosition&) const = default;
};

struct EvalReport {
  std::vector<std::string> ids;
  std::vector<double> sequence_bits;  // per-sequence mean
  double mean_bits = 0.0;             // mean over all events
  std::size_t events = 0;
  double accuracy = 0.0;
  // Non-empty iff mean_bits is infinite.
  std::vector<ZeroPosition> zero_positions;
};

// dists[s][t] is the prediction for event t of sequence s. Argmax ties go to
// the lowest pitch.
EvalReport cross_entropy(const Corpus& test, const std::vector<int>& alphabet,
                         const std::vector<std::vector<PredictiveDistribution>>& dists);

// -log2 p(s_t | s_0..t-1) per event.
std::vector<double> entropy_profile(const EventSequence& seq, const std::vector<int>& alphabet,
                                    std::span<const PredictiveDistribution> dists);

// p(next | prefix) over a fixed alphabet.
class NextEventModel {
 public:
  virtual ~NextEventModel() = default;
  virtual const std::vector<int>& alphabet() const = 0;
  virtual PredictiveDistribution next(std::span<const int> prefix) const = 0;
};

class LtmNextEventModel : public NextEventModel {
 public:
  // The key, when needed, is estimated once from `prime`.
  LtmNextEventModel(const TrainedModel& model, std::span<const int> prime);
  const std::vector<int>& alphabet() const override { return model_.alphabet; }
  PredictiveDistribution next(std::span<const int> prefix) const override;

 private:
  const TrainedModel& model_;
  std::optional<KeyEstimate> key_;
};

class NGramNextEventModel : public NextEventModel {
 public:
  explicit NGramNextEventModel(const NGramModel& model) : model_(model) {}
  const std::vector<int>& alphabet() const override { return model_.alphabet(); }
  PredictiveDistribution next(std::span<const int> prefix) const override { return model_.predict(prefix); }

 private:
  const NGramModel& model_;
};

class FunctionNextEventModel : public NextEventModel {
 public:
  using Fn = std::function<PredictiveDistribution(std::span<const int>)>;
  FunctionNextEventModel(std::vector<int> alphabet, Fn fn) : alphabet_(std::move(alphabet)), fn_(std::move(fn)) {}
  const std::vector<int>& alphabet() const override { return alphabet_; }
  PredictiveDistribution next(std::span<const int> prefix) const override { return fn_(prefix); }

 private:
  std::vector<int> alphabet_;
  Fn fn_;
};

enum class GenerationMethod { Beam, IterativeRandomWalk };
std::string_view to_string(GenerationMethod m);
GenerationMethod parse_generation_method(std::string_view text);

struct GenerationConfig {
  GenerationMethod method = GenerationMethod::Beam;
  std::size_t beams = 5;
  double threshold = 0.65;
  std::size_t length = 32;  // events generated after the prime
  std::vector<int> prime;
  std::size_t restarts = 20;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct GenerationResult {
  std::vector<int> sequence;  // prime followed by the generated events
  double mean_bits = 0.0;     // over the generated events
  // Per generated event: model probability of the chosen pitch and the
  // largest probability of that step.
  std::vector<double> chosen_p;
  std::vector<double> max_p;
};

// Keeps the k best prefixes by cumulative log-probability; each is extended by
// its k likeliest continuations. Ties go to the lexicographically smaller
// pitch sequence.
GenerationResult beam_search(const NextEventModel& model, const GenerationConfig& cfg);
// Samples among outcomes with p >= threshold * max p (renormalized); returns
// the restart with the lowest mean bits (earliest on ties).
GenerationResult iterative_random_walk(const NextEventModel& model, const GenerationConfig& cfg);
GenerationResult generate(const NextEventModel& model, const GenerationConfig& cfg);

// Admissible outcome indices of a walk step.
std::vector<std::size_t> admissible(const PredictiveDistribution& p, double threshold);

}  // namespace pulse
