#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pulse/features.hpp"

namespace pulse {

enum class Expansion { Backwards, Continuous, Forwards };
std::string_view to_string(Expansion e);
Expansion parse_expansion(std::string_view text);

// One token of an N+ template. A `*` marks the group as expanding;
// `(I C)*` expands its viewpoints jointly.
struct NPlusGroup {
  std::vector<Viewpoint> viewpoints;
  bool expand = false;

  bool operator==(const NPlusGroup&) const = default;
};

struct NPlusSpec {
  std::vector<NPlusGroup> groups;

  // Accepts `P I* C* K M_K`, `(I C)*`, `F123` and the compact `PI*C*KM_K`.
  // Throws std::invalid_argument on unknown tags, a bare `M`, or `*` on a
  // viewpoint that cannot take time offsets.
  static NPlusSpec parse(std::string_view text);
  std::string format() const;

  std::vector<Viewpoint> viewpoints() const;
  bool needs_key() const;
  bool operator==(const NPlusSpec&) const = default;
};

// Occurring values per viewpoint, sorted and unique.
using ValueSets = std::array<std::vector<Value>, kViewpointCount>;

ValueSets occurring_values(const Dataset& ds, std::span<const Datum> data);
inline ValueSets occurring_values(const Dataset& ds) { return occurring_values(ds, ds.data); }
// Adds the values observed at datum d; returns true if anything was new.
bool add_values(ValueSets& values, const Dataset& ds, const Datum& d);

// Restricts expansion to candidates whose past (sigma > 0) bases all match
// the context of one datum.
struct ExpansionAnchor {
  const SequenceContext* context = nullptr;
  std::size_t t = 0;

  bool matches(const CompoundFeature& f) const;
};

// Length-one sigma = 0 features for every declared viewpoint and value.
std::vector<CompoundFeature> init_features(const NPlusSpec& spec, const ValueSets& values);

// Candidates f & B[i+1, v] for every feature f in an expanding group B.
std::vector<CompoundFeature> expand_backwards(const FeatureSet& fs, const NPlusSpec& spec, const ValueSets& values,
                                              int iteration, const ExpansionAnchor* anchor = nullptr);
// Candidates f & B[max_sigma(f) + 1, v].
std::vector<CompoundFeature> expand_continuous(const FeatureSet& fs, const NPlusSpec& spec, const ValueSets& values,
                                               const ExpansionAnchor* anchor = nullptr);
// Candidates shift(f, 1) & B[0, v]; compounds with non-sequential bases are
// not shifted.
std::vector<CompoundFeature> expand_forwards(const FeatureSet& fs, const NPlusSpec& spec, const ValueSets& values,
                                             const ExpansionAnchor* anchor = nullptr);

// Candidates are unique and absent from fs; order is deterministic.
std::vector<CompoundFeature> expand(Expansion e, const FeatureSet& fs, const NPlusSpec& spec, const ValueSets& values,
                                    int iteration, const ExpansionAnchor* anchor = nullptr);

}  // namespace pulse
