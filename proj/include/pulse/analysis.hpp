#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pulse/pulse.hpp"

namespace pulse {

// Type of a compound: its distinct viewpoint tags in canonical order, e.g.
// "P", "I C".
std::string feature_type(const CompoundFeature& f);

struct TypeShare {
  std::string type;
  std::size_t count = 0;
  double abs_weight = 0.0;
  double share = 0.0;  // fraction of the total absolute weight
};

struct ZeroOrderEntry {
  Viewpoint viewpoint = Viewpoint::P;
  Value value;
  double weight = 0.0;
};

struct Motif {
  std::size_t length = 0;
  double weight = 0.0;
  CompoundFeature feature;
  std::vector<int> intervals;  // oldest first
};

struct AnalysisReport {
  std::vector<TypeShare> type_shares;
  std::vector<ZeroOrderEntry> zero_order;
  std::vector<Motif> motifs;
  // (max sigma, length) -> summed |weight|
  std::map<std::pair<int, std::size_t>, double> sigma_length;
  // (length, holes) -> feature count
  std::map<std::pair<std::size_t, int>, std::size_t> length_holes;
  double total_abs_weight = 0.0;
  std::size_t total_features = 0;
};

// Motifs are the highest-weight contiguous pure-interval compounds, `top` per
// length.
AnalysisReport analyze(const TrainedModel& model, std::size_t top = 1);

void write_type_shares(std::ostream& out, const AnalysisReport& r);
void write_zero_order(std::ostream& out, const AnalysisReport& r);
void write_motifs(std::ostream& out, const AnalysisReport& r);
void write_sigma_length(std::ostream& out, const AnalysisReport& r);
void write_length_holes(std::ostream& out, const AnalysisReport& r);

}  // namespace pulse
