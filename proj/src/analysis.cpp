#include "pulse/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "pulse/model_io.hpp"

namespace pulse {
namespace {

bool is_interval_motif(const CompoundFeature& f) {
  return f.contiguous() && std::all_of(f.basis().begin(), f.basis().end(),
                                       [](const BasisFeature& b) { return b.viewpoint == Viewpoint::I; });
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string feature_type(const CompoundFeature& f) {
  std::string out;
  Viewpoint last{};
  bool first = true;
  for (const auto& b : f.basis()) {
    if (!first && b.viewpoint == last) continue;
    if (!first) out += ' ';
    out += tag(b.viewpoint);
    last = b.viewpoint;
    first = false;
  }
  return out;
}

AnalysisReport analyze(const TrainedModel& model, std::size_t top) {
  AnalysisReport r;
  const FeatureSet& fs = model.features;
  std::map<std::string, TypeShare> shares;
  std::map<std::size_t, std::vector<Motif>> motifs;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const CompoundFeature& f = fs.feature(i);
    const double w = fs.weights()[i];
    const double aw = std::abs(w);
    r.total_abs_weight += aw;
    ++r.total_features;

    auto& share = shares[feature_type(f)];
    share.type = feature_type(f);
    ++share.count;
    share.abs_weight += aw;

    if (f.length() == 1 && f.max_sigma() == 0) {
      r.zero_order.push_back(ZeroOrderEntry{f.basis().front().viewpoint, f.basis().front().value, w});
    }
    if (is_interval_motif(f)) {
      Motif m{f.length(), w, f, {}};
      for (const auto& b : f.basis()) m.intervals.push_back(b.value.a);  // sigma descending = oldest first
      motifs[f.length()].push_back(std::move(m));
    }
    r.sigma_length[{f.max_sigma(), f.length()}] += aw;
    ++r.length_holes[{f.length(), f.holes()}];
  }
  for (auto& [type, share] : shares) {
    share.share = r.total_abs_weight > 0.0 ? share.abs_weight / r.total_abs_weight : 0.0;
    r.type_shares.push_back(share);
  }
  std::sort(r.zero_order.begin(), r.zero_order.end(), [](const ZeroOrderEntry& a, const ZeroOrderEntry& b) {
    return index(a.viewpoint) != index(b.viewpoint) ? index(a.viewpoint) < index(b.viewpoint) : a.value < b.value;
  });
  for (auto& [length, list] : motifs) {
    std::stable_sort(list.begin(), list.end(), [](const Motif& a, const Motif& b) { return a.weight > b.weight; });
    for (std::size_t i = 0; i < std::min(top, list.size()); ++i) r.motifs.push_back(list[i]);
  }
  return r;
}

void write_type_shares(std::ostream& out, const AnalysisReport& r) {
  out << "type,count,abs_weight,share\n";
  for (const auto& s : r.type_shares) {
    out << csv_quote(s.type) << ',' << s.count << ',' << format_double(s.abs_weight) << ',' << format_double(s.share)
        << '\n';
  }
}

void write_zero_order(std::ostream& out, const AnalysisReport& r) {
  out << "viewpoint,value,weight\n";
  for (const auto& e : r.zero_order) {
    out << tag(e.viewpoint) << ',' << csv_quote(format_value(e.viewpoint, e.value)) << ',' << format_double(e.weight)
        << '\n';
  }
}

void write_motifs(std::ostream& out, const AnalysisReport& r) {
  out << "length,weight,intervals,feature\n";
  for (const auto& m : r.motifs) {
    std::string intervals;
    for (std::size_t i = 0; i < m.intervals.size(); ++i) intervals += (i ? " " : "") + std::to_string(m.intervals[i]);
    out << m.length << ',' << format_double(m.weight) << ',' << intervals << ',' << csv_quote(format_feature(m.feature))
        << '\n';
  }
}

void write_sigma_length(std::ostream& out, const AnalysisReport& r) {
  out << "max_sigma,length,abs_weight\n";
  for (const auto& [key, w] : r.sigma_length) out << key.first << ',' << key.second << ',' << format_double(w) << '\n';
}

void write_length_holes(std::ostream& out, const AnalysisReport& r) {
  out << "length,holes,count\n";
  for (const auto& [key, n] : r.length_holes) out << key.first << ',' << key.second << ',' << n << '\n';
}

}  // namespace pulse
