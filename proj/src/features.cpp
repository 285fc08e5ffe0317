#include "pulse/features.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <stdexcept>

#include "pulse/parallel.hpp"

namespace pulse {
namespace {

bool value_in_range(Viewpoint vp, Value v) {
  switch (vp) {
    case Viewpoint::P: return v.a >= 0 && v.a <= 127 && v.b == 0;
    case Viewpoint::O:
    case Viewpoint::T: return v.a >= 0 && v.a < 12 && v.b == 0;
    case Viewpoint::C: return v.a >= -1 && v.a <= 1 && v.b == 0;
    case Viewpoint::X: return v.a >= -2 && v.a <= 2 && v.b == 0;
    case Viewpoint::M: return v.a >= 1 && v.b == 0;
    case Viewpoint::K: return (v.a == 0 || v.a == 1) && v.b >= 0 && v.b < 12;
    case Viewpoint::MP: return v.a >= 1 && v.b >= 0 && v.b <= 127;
    case Viewpoint::MK: return v.a >= 1 && v.b >= 0 && v.b < 24;
    case Viewpoint::MT: return v.a >= 1 && v.b >= 0 && v.b < 12;
    default: return v.b == 0;
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

BasisFeature parse_basis(std::string_view text) {
  const auto fail = [&]() -> BasisFeature {
    throw std::invalid_argument("bad basis feature '" + std::string(text) + "'");
  };
  text = trim(text);
  const auto open = text.find('[');
  if (open == std::string_view::npos || text.back() != ']') return fail();
  const auto vp = parse_viewpoint(text.substr(0, open));
  if (!vp) return fail();
  auto inner = text.substr(open + 1, text.size() - open - 2);

  // Accept the UTF-8 symbols and plain ASCII s=/v=.
  std::string_view sigma_text;
  std::string_view value_text;
  for (std::string_view sigma_key : {std::string_view("σ="), std::string_view("s=")}) {
    if (inner.substr(0, sigma_key.size()) != sigma_key) continue;
    inner.remove_prefix(sigma_key.size());
    for (std::string_view value_key : {std::string_view(",ν="), std::string_view(",v=")}) {
      const auto pos = inner.find(value_key);
      if (pos == std::string_view::npos) continue;
      sigma_text = inner.substr(0, pos);
      value_text = inner.substr(pos + value_key.size());
      break;
    }
    break;
  }
  if (sigma_text.empty() || value_text.empty()) return fail();
  int sigma = 0;
  const auto [ptr, ec] = std::from_chars(sigma_text.data(), sigma_text.data() + sigma_text.size(), sigma);
  if (ec != std::errc{} || ptr != sigma_text.data() + sigma_text.size()) return fail();
  const auto value = parse_value(*vp, value_text);
  if (!value) return fail();
  return BasisFeature{*vp, sigma, *value};
}

// Feature split into the parts that depend on the context only and the
// sigma = 0 parts that depend on the candidate outcome.
struct CompiledFeature {
  std::vector<BasisFeature> context;
  std::vector<BasisFeature> outcome;
};

}  // namespace

bool canonical_less(const BasisFeature& a, const BasisFeature& b) {
  if (a.viewpoint != b.viewpoint) return index(a.viewpoint) < index(b.viewpoint);
  if (a.sigma != b.sigma) return a.sigma > b.sigma;
  return a.value < b.value;
}

CompoundFeature::CompoundFeature(std::vector<BasisFeature> basis) : basis_(std::move(basis)) {
  if (basis_.empty()) throw std::invalid_argument("compound feature needs at least one basis feature");
  std::sort(basis_.begin(), basis_.end(), canonical_less);
  bool predictive = false;
  for (std::size_t i = 0; i < basis_.size(); ++i) {
    const BasisFeature& b = basis_[i];
    if (b.sigma < 0) throw std::invalid_argument("negative time offset");
    if (b.sigma > 0 && !is_sequential(b.viewpoint)) {
      throw std::invalid_argument(std::string(tag(b.viewpoint)) + " features are only defined at offset 0");
    }
    if (!value_in_range(b.viewpoint, b.value)) {
      throw std::invalid_argument("value " + format_value(b.viewpoint, b.value) + " out of range for " +
                                  std::string(tag(b.viewpoint)));
    }
    if (i > 0 && basis_[i - 1].viewpoint == b.viewpoint && basis_[i - 1].sigma == b.sigma) {
      throw std::invalid_argument("repeated (viewpoint, offset) in compound feature");
    }
    if (b.sigma == 0 && is_predictive(b.viewpoint)) predictive = true;
  }
  if (!predictive) throw std::invalid_argument("compound feature has no predictive offset-0 basis feature");
}

int CompoundFeature::max_sigma() const {
  int m = 0;
  for (const auto& b : basis_) m = std::max(m, b.sigma);
  return m;
}

int CompoundFeature::holes() const {
  std::set<int> offsets;
  for (const auto& b : basis_) offsets.insert(b.sigma);
  return max_sigma() + 1 - static_cast<int>(offsets.size());
}

bool CompoundFeature::contains_viewpoint(Viewpoint vp) const {
  return std::any_of(basis_.begin(), basis_.end(), [vp](const BasisFeature& b) { return b.viewpoint == vp; });
}

Viewpoint CompoundFeature::predictive_viewpoint() const {
  for (const auto& b : basis_) {
    if (b.sigma == 0 && is_predictive(b.viewpoint)) return b.viewpoint;
  }
  return basis_.front().viewpoint;
}

CompoundFeature CompoundFeature::shifted(int by) const {
  std::vector<BasisFeature> out = basis_;
  for (auto& b : out) b.sigma += by;
  CompoundFeature f = *this;
  f.basis_ = std::move(out);
  return f;
}

CompoundFeature CompoundFeature::with(const BasisFeature& extra) const {
  std::vector<BasisFeature> out = basis_;
  out.push_back(extra);
  return CompoundFeature(std::move(out));
}

bool CompoundFeature::operator<(const CompoundFeature& other) const {
  return std::lexicographical_compare(basis_.begin(), basis_.end(), other.basis_.begin(), other.basis_.end(),
                                      canonical_less);
}

std::size_t CompoundFeatureHash::operator()(const CompoundFeature& f) const noexcept {
  std::size_t h = 1469598103934665603ull;
  const auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  };
  for (const auto& b : f.basis()) {
    mix(index(b.viewpoint));
    mix(static_cast<std::uint64_t>(b.sigma));
    mix(static_cast<std::uint32_t>(b.value.a));
    mix(static_cast<std::uint32_t>(b.value.b));
  }
  return h;
}

std::string format_feature(const CompoundFeature& f) {
  std::string out;
  for (std::size_t i = 0; i < f.basis().size(); ++i) {
    const auto& b = f.basis()[i];
    if (i > 0) out += " & ";
    out += std::string(tag(b.viewpoint)) + "[σ=" + std::to_string(b.sigma) + ",ν=" + format_value(b.viewpoint, b.value) +
           "]";
  }
  return out;
}

CompoundFeature parse_feature(std::string_view text) {
  std::vector<BasisFeature> basis;
  std::size_t start = 0;
  for (;;) {
    const auto pos = text.find('&', start);
    basis.push_back(parse_basis(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return CompoundFeature(std::move(basis));
}

std::optional<std::size_t> FeatureSet::find(const CompoundFeature& f) const {
  const auto it = index_.find(f);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool FeatureSet::add(CompoundFeature f, double weight) {
  if (index_.count(f) != 0) return false;
  index_.emplace(f, features_.size());
  features_.push_back(std::move(f));
  weights_.push_back(weight);
  return true;
}

FeatureSet FeatureSet::select(const std::vector<bool>& keep) const {
  FeatureSet out;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (keep[i]) out.add(features_[i], weights_[i]);
  }
  return out;
}

SequenceContext::SequenceContext(const EventSequence& seq, std::optional<KeyEstimate> key)
    : pitches_(seq.pitches()), metrical_(metrical_weights(seq)), key_(key) {
  for (Viewpoint vp : kAllViewpoints) {
    auto& s = streams_[index(vp)];
    s.resize(pitches_.size());
    if (needs_key(vp) && !key_) continue;
    for (std::size_t t = 0; t < pitches_.size(); ++t) s[t] = value_at(vp, pitches_, metrical_, key_, t, pitches_[t]);
  }
}

std::optional<Value> SequenceContext::outcome_value(Viewpoint vp, std::size_t t, int pitch) const {
  return value_at(vp, pitches_, metrical_, key_, t, pitch);
}

Dataset Dataset::from_corpus(const Corpus& corpus, const KeyProfiles* profiles, bool duration_weighted) {
  Dataset ds;
  ds.alphabet = corpus.alphabet();
  ds.contexts.reserve(corpus.size());
  for (std::uint32_t s = 0; s < corpus.size(); ++s) {
    const auto& seq = corpus.sequences()[s];
    std::optional<KeyEstimate> key;
    if (profiles != nullptr) key = find_key(seq, *profiles, duration_weighted);
    ds.contexts.emplace_back(seq, key);
    for (std::uint32_t t = 0; t < seq.size(); ++t) ds.data.push_back(Datum{s, t});
  }
  return ds;
}

int Dataset::outcome_index(int pitch) const {
  const auto it = std::lower_bound(alphabet.begin(), alphabet.end(), pitch);
  if (it == alphabet.end() || *it != pitch) return -1;
  return static_cast<int>(it - alphabet.begin());
}

int Dataset::truth(std::size_t d) const {
  const Datum& datum = data[d];
  return outcome_index(contexts[datum.sequence].pitches()[datum.t]);
}

bool evaluate(const CompoundFeature& f, const SequenceContext& ctx, std::size_t t, int outcome_pitch) {
  for (const auto& b : f.basis()) {
    if (b.sigma == 0) {
      const auto v = ctx.outcome_value(b.viewpoint, t, outcome_pitch);
      if (!v || *v != b.value) return false;
    } else {
      if (static_cast<std::size_t>(b.sigma) > t) return false;
      const auto& v = ctx.stream(b.viewpoint, t - static_cast<std::size_t>(b.sigma));
      if (!v || *v != b.value) return false;
    }
  }
  return true;
}

void FeatureMatrix::append_row(std::vector<Entry> cells, int truth) {
  std::sort(cells.begin(), cells.end(), [](const Entry& a, const Entry& b) {
    return a.feature != b.feature ? a.feature < b.feature : a.outcome < b.outcome;
  });
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  for (const auto& c : cells) {
    if (c.feature >= features_ || c.outcome >= outcomes_) throw std::out_of_range("feature matrix cell out of range");
  }
  entries_.insert(entries_.end(), cells.begin(), cells.end());
  row_ptr_.push_back(entries_.size());
  truth_.push_back(truth);
}

bool FeatureMatrix::at(std::size_t d, std::size_t f, std::size_t y) const {
  const auto r = row(d);
  return std::binary_search(r.begin(), r.end(), Entry{static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(y)},
                            [](const Entry& a, const Entry& b) {
                              return a.feature != b.feature ? a.feature < b.feature : a.outcome < b.outcome;
                            });
}

std::vector<std::size_t> FeatureMatrix::column_counts() const {
  std::vector<std::size_t> counts(features_, 0);
  for (const auto& e : entries_) ++counts[e.feature];
  return counts;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::int64_t>& new_index, std::size_t new_count) const {
  FeatureMatrix out(new_count, outcomes_);
  out.entries_.reserve(entries_.size());
  out.row_ptr_.reserve(row_ptr_.size());
  out.truth_ = truth_;
  for (std::size_t d = 0; d < data(); ++d) {
    const std::size_t begin = out.entries_.size();
    for (const auto& e : row(d)) {
      const auto idx = new_index[e.feature];
      if (idx >= 0) out.entries_.push_back(Entry{static_cast<std::uint32_t>(idx), e.outcome});
    }
    // Remapping can reorder columns; restore the row invariant.
    std::sort(out.entries_.begin() + static_cast<std::ptrdiff_t>(begin), out.entries_.end(),
              [](const Entry& a, const Entry& b) {
                return a.feature != b.feature ? a.feature < b.feature : a.outcome < b.outcome;
              });
    out.row_ptr_.push_back(out.entries_.size());
  }
  return out;
}

void FeatureMatrix::append_rows(const FeatureMatrix& other) {
  if (other.features_ != features_ || other.outcomes_ != outcomes_) {
    throw std::invalid_argument("append_rows: feature or outcome dimension mismatch");
  }
  for (std::size_t d = 0; d < other.data(); ++d) {
    const auto r = other.row(d);
    entries_.insert(entries_.end(), r.begin(), r.end());
    row_ptr_.push_back(entries_.size());
    truth_.push_back(other.truth(d));
  }
}

FeatureMatrix FeatureMatrix::append_columns(const FeatureMatrix& other) const {
  if (other.data() != data() || other.outcomes_ != outcomes_) {
    throw std::invalid_argument("append_columns: row or outcome dimension mismatch");
  }
  FeatureMatrix out(features_ + other.features_, outcomes_);
  out.entries_.reserve(entries_.size() + other.entries_.size());
  out.truth_ = truth_;
  const auto offset = static_cast<std::uint32_t>(features_);
  for (std::size_t d = 0; d < data(); ++d) {
    const auto a = row(d);
    out.entries_.insert(out.entries_.end(), a.begin(), a.end());
    for (const auto& e : other.row(d)) out.entries_.push_back(Entry{e.feature + offset, e.outcome});
    out.row_ptr_.push_back(out.entries_.size());
  }
  return out;
}

FeatureMatrix build_matrix(const Dataset& dataset, std::span<const Datum> data,
                           std::span<const CompoundFeature> features, std::size_t threads) {
  const std::size_t n_out = dataset.alphabet.size();
  std::vector<CompiledFeature> compiled(features.size());
  std::array<bool, kViewpointCount> outcome_vp{};
  bool wants_key = false;
  for (std::size_t f = 0; f < features.size(); ++f) {
    for (const auto& b : features[f].basis()) {
      (b.sigma == 0 ? compiled[f].outcome : compiled[f].context).push_back(b);
      if (b.sigma == 0) outcome_vp[index(b.viewpoint)] = true;
      wants_key = wants_key || needs_key(b.viewpoint);
    }
  }
  if (wants_key) {
    for (const auto& d : data) {
      if (!dataset.contexts[d.sequence].key()) {
        throw std::invalid_argument("key-dependent features need key estimates for every sequence");
      }
    }
  }

  std::vector<std::vector<FeatureMatrix::Entry>> rows(data.size());
  parallel_for(data.size(), threads, [&](std::size_t d) {
    const Datum& datum = data[d];
    const SequenceContext& ctx = dataset.contexts[datum.sequence];
    const std::size_t t = datum.t;
    // Outcome-dependent values at position t, one per (viewpoint, outcome).
    std::array<std::vector<std::optional<Value>>, kViewpointCount> at_t;
    for (Viewpoint vp : kAllViewpoints) {
      if (!outcome_vp[index(vp)]) continue;
      auto& vals = at_t[index(vp)];
      vals.resize(n_out);
      for (std::size_t y = 0; y < n_out; ++y) vals[y] = ctx.outcome_value(vp, t, dataset.alphabet[y]);
    }
    auto& row = rows[d];
    for (std::size_t f = 0; f < compiled.size(); ++f) {
      const auto& cf = compiled[f];
      bool ok = true;
      for (const auto& b : cf.context) {
        if (static_cast<std::size_t>(b.sigma) > t) {
          ok = false;
          break;
        }
        const auto& v = ctx.stream(b.viewpoint, t - static_cast<std::size_t>(b.sigma));
        if (!v || *v != b.value) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      for (std::size_t y = 0; y < n_out; ++y) {
        bool match = true;
        for (const auto& b : cf.outcome) {
          const auto& v = at_t[index(b.viewpoint)][y];
          if (!v || *v != b.value) {
            match = false;
            break;
          }
        }
        if (match) row.push_back(FeatureMatrix::Entry{static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(y)});
      }
    }
  });

  FeatureMatrix m(features.size(), n_out);
  for (std::size_t d = 0; d < data.size(); ++d) {
    const Datum& datum = data[d];
    m.append_row(std::move(rows[d]), dataset.outcome_index(dataset.contexts[datum.sequence].pitches()[datum.t]));
  }
  return m;
}

std::pair<FeatureSet, FeatureMatrix> filter_irrelevant(const FeatureSet& fs, const FeatureMatrix& m) {
  const auto counts = m.column_counts();
  std::vector<bool> keep(fs.size());
  std::vector<std::int64_t> new_index(fs.size(), -1);
  std::size_t next = 0;
  for (std::size_t f = 0; f < fs.size(); ++f) {
    keep[f] = counts[f] > 0;
    if (keep[f]) new_index[f] = static_cast<std::int64_t>(next++);
  }
  return {fs.select(keep), m.select_columns(new_index, next)};
}

}  // namespace pulse
