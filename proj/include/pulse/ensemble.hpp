#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pulse/corpus.hpp"
#include "pulse/model.hpp"

namespace pulse {

// Interpolated n-gram baseline. Order k uses k preceding events; orders
// 0..max_order-1 are blended with weights proportional to k + 1 among the
// orders whose context has been seen. Order 0 is add-one smoothed, so no
// outcome ever gets probability 0.
class NGramModel {
 public:
  // max_order = 0 means unbounded (grows with the longest observed sequence).
  NGramModel(std::vector<int> alphabet, std::size_t max_order);

  void observe(std::span<const int> pitches);
  // Counts the event at position t of `pitches` given its preceding context.
  void observe_at(std::span<const int> pitches, std::size_t t);
  void observe(const Corpus& corpus);

  PredictiveDistribution predict(std::span<const int> context) const;

  const std::vector<int>& alphabet() const { return alphabet_; }
  std::size_t max_order() const { return max_order_; }
  // Effective order limit (for unbounded models, the longest sequence seen).
  std::size_t order_limit() const;
  // Counts of outcomes after `context` (|context| = order), or empty.
  const std::vector<double>* counts(std::span<const int> context) const;

 private:
  std::vector<int> alphabet_;
  std::size_t max_order_;
  std::size_t longest_ = 0;
  std::vector<double> unigram_;
  double total_ = 0.0;
  std::map<std::vector<int>, std::vector<double>> tables_;
};

// Online baseline: the prediction for event t uses a model fitted on events
// 0..t-1 of the same sequence.
std::vector<PredictiveDistribution> ngram_stm_predict(const EventSequence& seq, const std::vector<int>& alphabet,
                                                      std::size_t max_order);

enum class CombinationRule { Sum, Product };
std::string_view to_string(CombinationRule r);
CombinationRule parse_combination_rule(std::string_view text);

struct CombinationConfig {
  CombinationRule rule = CombinationRule::Product;
  double bias = 1.0;
};

// w = [(-sum_s ln p(s)) / ln |X|]^(-bias). A zero probability makes the
// bracket infinite, so w = 0 for bias > 0.
double combination_weight(const PredictiveDistribution& p, double bias);

// Weighted arithmetic (sum) or normalized geometric (product) mean. Throws
// std::invalid_argument for an empty list or mismatched sizes.
PredictiveDistribution combine(std::span<const PredictiveDistribution> dists, const CombinationConfig& cfg);

inline const std::vector<double> kBiasGrid{0, 1, 2, 3, 4, 5, 6, 16, 32};

// Per-event sources: sources[m][e] is model m's distribution for event e and
// truth[e] the observed alphabet index.
double combined_bits(const std::vector<std::vector<PredictiveDistribution>>& sources, std::span<const int> truth,
                     const CombinationConfig& cfg);
// Bias with the lowest combined bits; ties go to the earlier grid value.
double select_bias(const std::vector<std::vector<PredictiveDistribution>>& sources, std::span<const int> truth,
                   CombinationRule rule, std::span<const double> grid = kBiasGrid);

// CSV with header `sequence_id,t,p_<pitch>...` and one row per event, in
// corpus order.
void write_distributions(std::ostream& out, const Corpus& corpus, const std::vector<int>& alphabet,
                         const std::vector<std::vector<PredictiveDistribution>>& dists);
// Validates the column count against the alphabet and the rows per sequence
// against the corpus; throws ValidationError or ParseError.
std::vector<std::vector<PredictiveDistribution>> read_distributions(std::istream& in, const Corpus& corpus,
                                                                    const std::vector<int>& alphabet,
                                                                    const std::string& source = "<stream>");
std::vector<std::vector<PredictiveDistribution>> load_distributions(const std::filesystem::path& path,
                                                                    const Corpus& corpus,
                                                                    const std::vector<int>& alphabet);

}  // namespace pulse
