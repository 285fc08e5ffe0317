#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pulse/corpus.hpp"
#include "pulse/viewpoints.hpp"

namespace pulse {

// Indicator on the viewpoint value `sigma` events back; sigma = 0 is the
// predicted event.
struct BasisFeature {
  Viewpoint viewpoint = Viewpoint::P;
  int sigma = 0;
  Value value;

  bool operator==(const BasisFeature&) const = default;
};

// Canonical order: viewpoint tag order, sigma descending, then value.
bool canonical_less(const BasisFeature& a, const BasisFeature& b);

// Conjunction of basis features in canonical order. Construction throws
// std::invalid_argument unless the compound is non-empty, has at least one
// predictive sigma = 0 basis, no repeated (viewpoint, sigma) pair, only
// sequential viewpoints at sigma > 0, and every value within range.
class CompoundFeature {
 public:
  explicit CompoundFeature(std::vector<BasisFeature> basis);
  CompoundFeature(std::initializer_list<BasisFeature> basis)
      : CompoundFeature(std::vector<BasisFeature>(basis)) {}

  const std::vector<BasisFeature>& basis() const { return basis_; }
  std::size_t length() const { return basis_.size(); }

  // Maximum temporal extent; anchored and linked bases count as 0.
  int max_sigma() const;
  // Offsets missing between 0 and max_sigma.
  int holes() const;
  bool contiguous() const { return holes() == 0; }
  bool contains_viewpoint(Viewpoint vp) const;
  // Viewpoint of the first predictive sigma = 0 basis.
  Viewpoint predictive_viewpoint() const;

  // Every basis moved `by` events further into the past.
  CompoundFeature shifted(int by) const;
  // Conjunction with one more basis; throws if the result is invalid.
  CompoundFeature with(const BasisFeature& extra) const;

  bool operator==(const CompoundFeature&) const = default;
  bool operator<(const CompoundFeature& other) const;

 private:
  std::vector<BasisFeature> basis_;
};

struct CompoundFeatureHash {
  std::size_t operator()(const CompoundFeature& f) const noexcept;
};

// `P[σ=0,ν=60] & I[σ=1,ν=-2]`
std::string format_feature(const CompoundFeature& f);
CompoundFeature parse_feature(std::string_view text);

// Features with their weights; no duplicates.
class FeatureSet {
 public:
  std::size_t size() const { return features_.size(); }
  bool empty() const { return features_.empty(); }
  const std::vector<CompoundFeature>& features() const { return features_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& weights() { return weights_; }
  const CompoundFeature& feature(std::size_t i) const { return features_[i]; }

  bool contains(const CompoundFeature& f) const { return index_.count(f) != 0; }
  std::optional<std::size_t> find(const CompoundFeature& f) const;
  // Returns false (and leaves the set unchanged) for a duplicate.
  bool add(CompoundFeature f, double weight = 0.0);
  // Keeps the features whose flag is set, preserving order and weights.
  FeatureSet select(const std::vector<bool>& keep) const;

 private:
  std::vector<CompoundFeature> features_;
  std::vector<double> weights_;
  std::unordered_map<CompoundFeature, std::size_t, CompoundFeatureHash> index_;
};

// Per-sequence cache of every viewpoint stream. The key is needed only by
// K/T/MK/MT; without one those streams are undefined.
class SequenceContext {
 public:
  SequenceContext(const EventSequence& seq, std::optional<KeyEstimate> key);

  std::size_t size() const { return pitches_.size(); }
  const std::vector<int>& pitches() const { return pitches_; }
  const std::vector<int>& metrical() const { return metrical_; }
  const std::optional<KeyEstimate>& key() const { return key_; }

  const std::optional<Value>& stream(Viewpoint vp, std::size_t t) const { return streams_[index(vp)][t]; }
  // Value at position t if the event there had pitch `pitch`.
  std::optional<Value> outcome_value(Viewpoint vp, std::size_t t, int pitch) const;

 private:
  std::vector<int> pitches_;
  std::vector<int> metrical_;
  std::optional<KeyEstimate> key_;
  std::array<std::vector<std::optional<Value>>, kViewpointCount> streams_;
};

// One prediction target: event t of sequence `sequence`.
struct Datum {
  std::uint32_t sequence = 0;
  std::uint32_t t = 0;

  bool operator==(const Datum&) const = default;
};

// Contexts plus the data points drawn from them, over a fixed alphabet.
struct Dataset {
  std::vector<int> alphabet;
  std::vector<SequenceContext> contexts;
  std::vector<Datum> data;

  // Every event of every sequence becomes a datum. Keys are estimated with
  // `profiles` when given.
  static Dataset from_corpus(const Corpus& corpus, const KeyProfiles* profiles, bool duration_weighted = true);

  int outcome_index(int pitch) const;
  // Alphabet index of the observed event of datum d.
  int truth(std::size_t d) const;
};

bool evaluate(const CompoundFeature& f, const SequenceContext& ctx, std::size_t t, int outcome_pitch);

// Sparse binary (datum x feature x outcome) tensor. Each datum row stores its
// (feature, outcome) cells sorted by feature then outcome.
class FeatureMatrix {
 public:
  struct Entry {
    std::uint32_t feature;
    std::uint32_t outcome;
    bool operator==(const Entry&) const = default;
  };

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t features, std::size_t outcomes) : features_(features), outcomes_(outcomes) {}

  // Cells may come in any order; duplicates are merged.
  void append_row(std::vector<Entry> cells, int truth);

  std::size_t data() const { return truth_.size(); }
  std::size_t features() const { return features_; }
  std::size_t outcomes() const { return outcomes_; }
  std::size_t nonzeros() const { return entries_.size(); }

  std::span<const Entry> row(std::size_t d) const {
    return {entries_.data() + row_ptr_[d], entries_.data() + row_ptr_[d + 1]};
  }
  int truth(std::size_t d) const { return truth_[d]; }
  bool at(std::size_t d, std::size_t f, std::size_t y) const;

  std::vector<std::size_t> column_counts() const;
  // new_index[f] is the new column of f, or -1 to drop it.
  FeatureMatrix select_columns(const std::vector<std::int64_t>& new_index, std::size_t new_count) const;
  // Appends other's rows; feature and outcome dimensions must match.
  void append_rows(const FeatureMatrix& other);
  // Same data rows; other's columns are appended after ours.
  FeatureMatrix append_columns(const FeatureMatrix& other) const;

  bool operator==(const FeatureMatrix&) const = default;

 private:
  std::size_t features_ = 0;
  std::size_t outcomes_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<Entry> entries_;
  std::vector<int> truth_;
};

// matrix[d][f][y] = evaluate(features[f], datum d, alphabet[y]). Rows are
// computed independently, so the result does not depend on `threads`.
FeatureMatrix build_matrix(const Dataset& dataset, std::span<const Datum> data,
                           std::span<const CompoundFeature> features, std::size_t threads = 1);
inline FeatureMatrix build_matrix(const Dataset& dataset, std::span<const CompoundFeature> features,
                                  std::size_t threads = 1) {
  return build_matrix(dataset, dataset.data, features, threads);
}

// Drops features whose matrix slice is all zero.
std::pair<FeatureSet, FeatureMatrix> filter_irrelevant(const FeatureSet& fs, const FeatureMatrix& m);

}  // namespace pulse
