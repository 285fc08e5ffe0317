#include "pulse/nplus.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <unordered_set>

namespace pulse {
namespace {

// Longest match first, so `M_K` wins over `M` and `F123` over `F1`.
constexpr std::array<std::string_view, 18> kSpecTags{
    "F123", "M_P", "M_K", "M_T", "F1", "F2", "F3", "MP", "MK", "MT", "P", "I", "O", "C", "X", "M", "K", "T",
};

std::string spec_tag(Viewpoint vp) {
  switch (vp) {
    case Viewpoint::MP: return "M_P";
    case Viewpoint::MK: return "M_K";
    case Viewpoint::MT: return "M_T";
    default: return std::string(tag(vp));
  }
}

void append_tag(std::string_view t, std::vector<Viewpoint>& out) {
  if (t == "F123") {
    out.insert(out.end(), {Viewpoint::F1, Viewpoint::F2, Viewpoint::F3});
    return;
  }
  out.push_back(*parse_viewpoint(t));
}

// Reads one tag at `pos`; leaves `pos` unchanged if none matches.
void read_tag(std::string_view text, std::size_t& pos, std::vector<Viewpoint>& out) {
  for (std::string_view t : kSpecTags) {
    if (text.substr(pos, t.size()) == t) {
      append_tag(t, out);
      pos += t.size();
      return;
    }
  }
}

bool in_group(const CompoundFeature& f, const NPlusGroup& g) {
  return std::any_of(g.viewpoints.begin(), g.viewpoints.end(), [&](Viewpoint vp) { return f.contains_viewpoint(vp); });
}

bool all_sequential(const CompoundFeature& f) {
  return std::all_of(f.basis().begin(), f.basis().end(), [](const BasisFeature& b) { return is_sequential(b.viewpoint); });
}

class CandidateSink {
 public:
  CandidateSink(const FeatureSet& fs, const ExpansionAnchor* anchor) : fs_(fs), anchor_(anchor) {}

  void offer(const CompoundFeature& parent, const BasisFeature& extra) {
    for (const auto& b : parent.basis()) {
      if (b.viewpoint == extra.viewpoint && b.sigma == extra.sigma) return;
    }
    push(parent.with(extra));
  }

  void push(CompoundFeature f) {
    if (fs_.contains(f) || seen_.count(f) != 0) return;
    if (anchor_ != nullptr && !anchor_->matches(f)) return;
    seen_.insert(f);
    out_.push_back(std::move(f));
  }

  std::vector<CompoundFeature> take() { return std::move(out_); }

 private:
  const FeatureSet& fs_;
  const ExpansionAnchor* anchor_;
  std::unordered_set<CompoundFeature, CompoundFeatureHash> seen_;
  std::vector<CompoundFeature> out_;
};

}  // namespace

std::string_view to_string(Expansion e) {
  switch (e) {
    case Expansion::Backwards: return "backwards";
    case Expansion::Continuous: return "continuous";
    case Expansion::Forwards: return "forwards";
  }
  return "?";
}

Expansion parse_expansion(std::string_view text) {
  if (text == "backwards") return Expansion::Backwards;
  if (text == "continuous") return Expansion::Continuous;
  if (text == "forwards") return Expansion::Forwards;
  throw std::invalid_argument("unknown expansion '" + std::string(text) + "'");
}

NPlusSpec NPlusSpec::parse(std::string_view text) {
  NPlusSpec spec;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (std::isspace(static_cast<unsigned char>(text[pos]))) {
      ++pos;
      continue;
    }
    NPlusGroup group;
    if (text[pos] == '(') {
      const auto close = text.find(')', pos);
      if (close == std::string_view::npos) throw std::invalid_argument("unbalanced '(' in N+ spec");
      const std::string_view inner = text.substr(pos + 1, close - pos - 1);
      std::size_t p = 0;
      while (p < inner.size()) {
        if (std::isspace(static_cast<unsigned char>(inner[p]))) {
          ++p;
          continue;
        }
        const std::size_t before = p;
        read_tag(inner, p, group.viewpoints);
        if (p == before) throw std::invalid_argument("unknown viewpoint in N+ group at '" + std::string(inner.substr(p)) + "'");
      }
      pos = close + 1;
    } else {
      const std::size_t before = pos;
      read_tag(text, pos, group.viewpoints);
      if (pos == before) throw std::invalid_argument("unknown viewpoint in N+ spec at '" + std::string(text.substr(pos)) + "'");
    }
    if (pos < text.size() && text[pos] == '*') {
      group.expand = true;
      ++pos;
    }
    if (group.viewpoints.empty()) throw std::invalid_argument("empty group in N+ spec");
    for (Viewpoint vp : group.viewpoints) {
      if (vp == Viewpoint::M) {
        throw std::invalid_argument("M is not predictive on its own; use a linked type such as M_P");
      }
      if (group.expand && !is_sequential(vp)) {
        throw std::invalid_argument(spec_tag(vp) + " cannot be expanded in time");
      }
    }
    spec.groups.push_back(std::move(group));
  }
  if (spec.groups.empty()) throw std::invalid_argument("empty N+ spec");
  return spec;
}

std::string NPlusSpec::format() const {
  std::string out;
  for (const auto& g : groups) {
    if (!out.empty()) out += ' ';
    if (g.viewpoints.size() == 1) {
      out += spec_tag(g.viewpoints.front());
    } else {
      out += '(';
      for (std::size_t i = 0; i < g.viewpoints.size(); ++i) {
        if (i > 0) out += ' ';
        out += spec_tag(g.viewpoints[i]);
      }
      out += ')';
    }
    if (g.expand) out += '*';
  }
  return out;
}

std::vector<Viewpoint> NPlusSpec::viewpoints() const {
  std::vector<Viewpoint> out;
  for (const auto& g : groups) {
    for (Viewpoint vp : g.viewpoints) {
      if (std::find(out.begin(), out.end(), vp) == out.end()) out.push_back(vp);
    }
  }
  return out;
}

bool NPlusSpec::needs_key() const {
  const auto vps = viewpoints();
  return std::any_of(vps.begin(), vps.end(), [](Viewpoint vp) { return pulse::needs_key(vp); });
}

ValueSets occurring_values(const Dataset& ds, std::span<const Datum> data) {
  ValueSets values;
  for (const auto& d : data) add_values(values, ds, d);
  return values;
}

bool add_values(ValueSets& values, const Dataset& ds, const Datum& d) {
  bool changed = false;
  const auto& ctx = ds.contexts[d.sequence];
  for (Viewpoint vp : kAllViewpoints) {
    if (needs_key(vp) && !ctx.key()) continue;
    const auto& v = ctx.stream(vp, d.t);
    if (!v) continue;
    auto& set = values[index(vp)];
    const auto it = std::lower_bound(set.begin(), set.end(), *v);
    if (it != set.end() && *it == *v) continue;
    set.insert(it, *v);
    changed = true;
  }
  return changed;
}

bool ExpansionAnchor::matches(const CompoundFeature& f) const {
  for (const auto& b : f.basis()) {
    if (b.sigma == 0) continue;
    if (static_cast<std::size_t>(b.sigma) > t) return false;
    const auto& v = context->stream(b.viewpoint, t - static_cast<std::size_t>(b.sigma));
    if (!v || *v != b.value) return false;
  }
  return true;
}

std::vector<CompoundFeature> init_features(const NPlusSpec& spec, const ValueSets& values) {
  std::vector<CompoundFeature> out;
  for (Viewpoint vp : spec.viewpoints()) {
    for (const Value& v : values[index(vp)]) out.push_back(CompoundFeature{BasisFeature{vp, 0, v}});
  }
  return out;
}

std::vector<CompoundFeature> expand_backwards(const FeatureSet& fs, const NPlusSpec& spec, const ValueSets& values,
                                              int iteration, const ExpansionAnchor* anchor) {
  CandidateSink sink(fs, anchor);
  for (const auto& f : fs.features()) {
    for (const auto& g : spec.groups) {
      if (!g.expand || !in_group(f, g)) continue;
      for (Viewpoint vp : g.viewpoints) {
        for (const Value& v : values[index(vp)]) sink.offer(f, BasisFeature{vp, iteration + 1, v});
      }
    }
  }
  return sink.take();
}

std::vector<CompoundFeature> expand_continuous(const FeatureSet& fs, const NPlusSpec& spec, const ValueSets& values,
                                               const ExpansionAnchor* anchor) {
  CandidateSink sink(fs, anchor);
  for (const auto& f : fs.features()) {
    const int sigma = f.max_sigma() + 1;
    for (const auto& g : spec.groups) {
      if (!g.expand || !in_group(f, g)) continue;
      for (Viewpoint vp : g.viewpoints) {
        for (const Value& v : values[index(vp)]) sink.offer(f, BasisFeature{vp, sigma, v});
      }
    }
  }
  return sink.take();
}

std::vector<CompoundFeature> expand_forwards(const FeatureSet& fs, const NPlusSpec& spec, const ValueSets& values,
                                             const ExpansionAnchor* anchor) {
  CandidateSink sink(fs, anchor);
  for (const auto& f : fs.features()) {
    if (!all_sequential(f)) continue;
    const CompoundFeature shifted = f.shifted(1);
    for (const auto& g : spec.groups) {
      if (!g.expand || !in_group(f, g)) continue;
      for (Viewpoint vp : g.viewpoints) {
        for (const Value& v : values[index(vp)]) sink.offer(shifted, BasisFeature{vp, 0, v});
      }
    }
  }
  return sink.take();
}

std::vector<CompoundFeature> expand(Expansion e, const FeatureSet& fs, const NPlusSpec& spec, const ValueSets& values,
                                    int iteration, const ExpansionAnchor* anchor) {
  switch (e) {
    case Expansion::Backwards: return expand_backwards(fs, spec, values, iteration, anchor);
    case Expansion::Continuous: return expand_continuous(fs, spec, values, anchor);
    case Expansion::Forwards: return expand_forwards(fs, spec, values, anchor);
  }
  return {};
}

}  // namespace pulse
