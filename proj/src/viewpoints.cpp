#include "pulse/viewpoints.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <stdexcept>

#include "pulse/error.hpp"

namespace pulse {
namespace {

constexpr std::array<std::string_view, kViewpointCount> kTags{
    "P", "I", "O", "C", "X", "M", "K", "T", "F1", "F2", "F3", "MP", "MK", "MT",
};

std::optional<int> parse_int(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string format_key_value(int mode, int degree) { return (mode == 0 ? "M" : "m") + std::to_string(degree); }

std::optional<Value> parse_key_value(std::string_view s) {
  if (s.size() < 2 || (s[0] != 'M' && s[0] != 'm')) return std::nullopt;
  const auto degree = parse_int(s.substr(1));
  if (!degree || *degree < 0 || *degree > 11) return std::nullopt;
  return Value{s[0] == 'M' ? 0 : 1, *degree};
}

Rational floor_mod(Rational x, Rational m) {
  const Rational q = x / m;
  std::int64_t f = q.numerator() / q.denominator();
  if (q.numerator() < 0 && q.numerator() % q.denominator() != 0) --f;
  return x - m * Rational(f);
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::optional<int> anchor_index(Viewpoint vp) {
  switch (vp) {
    case Viewpoint::F1: return 0;
    case Viewpoint::F2: return 1;
    case Viewpoint::F3: return 2;
    default: return std::nullopt;
  }
}

}  // namespace

std::string_view tag(Viewpoint vp) { return kTags[index(vp)]; }

std::optional<Viewpoint> parse_viewpoint(std::string_view t) {
  if (t == "M_P") return Viewpoint::MP;
  if (t == "M_K") return Viewpoint::MK;
  if (t == "M_T") return Viewpoint::MT;
  for (Viewpoint vp : kAllViewpoints) {
    if (tag(vp) == t) return vp;
  }
  return std::nullopt;
}

std::string format_value(Viewpoint vp, Value v) {
  switch (vp) {
    case Viewpoint::K: return format_key_value(v.a, v.b);
    case Viewpoint::MP:
    case Viewpoint::MT: return std::to_string(v.a) + ":" + std::to_string(v.b);
    case Viewpoint::MK: return std::to_string(v.a) + ":" + format_key_value(v.b / 12, v.b % 12);
    default: return std::to_string(v.a);
  }
}

std::optional<Value> parse_value(Viewpoint vp, std::string_view text) {
  if (vp == Viewpoint::K) return parse_key_value(text);
  if (is_linked(vp)) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    const auto weight = parse_int(text.substr(0, colon));
    if (!weight) return std::nullopt;
    const auto inner_text = text.substr(colon + 1);
    if (vp == Viewpoint::MK) {
      const auto k = parse_key_value(inner_text);
      if (!k) return std::nullopt;
      return Value{*weight, k->a * 12 + k->b};
    }
    const auto inner = parse_int(inner_text);
    if (!inner) return std::nullopt;
    return Value{*weight, *inner};
  }
  const auto v = parse_int(text);
  if (!v) return std::nullopt;
  return Value{*v, 0};
}

KeyProfiles KeyProfiles::parse(std::istream& in) {
  KeyProfiles p;
  for (std::size_t i = 0; i < 24; ++i) {
    double v = 0.0;
    if (!(in >> v)) throw ParseError("key profiles", 0, "expected 24 reals, got " + std::to_string(i));
    (i < 12 ? p.major[i] : p.minor[i - 12]) = v;
  }
  double extra = 0.0;
  if (in >> extra) throw ParseError("key profiles", 0, "more than 24 values");
  return p;
}

KeyProfiles KeyProfiles::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open key profile file " + path.string());
  return parse(in);
}

const KeyProfiles& KeyProfiles::shipped() {
  static const KeyProfiles profiles = load(std::filesystem::path(PULSE_DATA_DIR) / "key_profiles_temperley.txt");
  return profiles;
}

int octave_invariant(int interval) { return ((interval % 12) + 12) % 12; }

int contour(int interval) { return (interval > 0) - (interval < 0); }

int extended_contour(int interval) {
  const int c = contour(interval);
  return std::abs(interval) > 5 ? 2 * c : c;
}

std::vector<int> metrical_weights(const EventSequence& seq) {
  const Rational bar = seq.time_signature.bar_length();
  Rational shortest = seq.events.front().duration;
  for (const auto& e : seq.events) shortest = std::min(shortest, e.duration);

  std::vector<Rational> spacings{bar};
  Rational next = is_power_of_two(seq.time_signature.numerator) ? bar / 2 : bar / seq.time_signature.numerator;
  while (next >= shortest && spacings.size() < 32) {
    spacings.push_back(next);
    next /= 2;
  }

  std::vector<int> weights;
  weights.reserve(seq.size());
  for (const auto& e : seq.events) {
    const Rational pos = floor_mod(e.onset - seq.anacrusis, bar);
    int w = 0;
    for (const Rational& s : spacings) {
      if ((pos / s).denominator() == 1) ++w;
    }
    weights.push_back(std::max(w, 1));
  }
  return weights;
}

KeyEstimate find_key(const EventSequence& seq, const KeyProfiles& profiles, bool duration_weighted) {
  if (seq.events.empty()) throw std::invalid_argument("find_key: empty sequence");
  std::array<double, 12> hist{};
  for (const auto& e : seq.events) {
    hist[static_cast<std::size_t>(octave_invariant(e.pitch))] +=
        duration_weighted ? boost::rational_cast<double>(e.duration) : 1.0;
  }
  const int first_pc = octave_invariant(seq.events.front().pitch);
  const auto distinct = std::count_if(hist.begin(), hist.end(), [](double v) { return v > 0.0; });

  double mean = 0.0;
  for (double v : hist) mean += v;
  mean /= 12.0;
  double var = 0.0;
  for (double v : hist) var += (v - mean) * (v - mean);
  if (distinct < 2 || var <= 0.0) return KeyEstimate{first_pc, Mode::Major, 0.0};

  KeyEstimate best{0, Mode::Major, -std::numeric_limits<double>::infinity()};
  for (int tonic = 0; tonic < 12; ++tonic) {
    for (Mode mode : {Mode::Major, Mode::Minor}) {
      const auto& prof = mode == Mode::Major ? profiles.major : profiles.minor;
      double pmean = 0.0;
      for (double v : prof) pmean += v;
      pmean /= 12.0;
      double cov = 0.0;
      double pvar = 0.0;
      for (int pc = 0; pc < 12; ++pc) {
        const double pv = prof[static_cast<std::size_t>(octave_invariant(pc - tonic))] - pmean;
        cov += (hist[static_cast<std::size_t>(pc)] - mean) * pv;
        pvar += pv * pv;
      }
      const double r = pvar > 0.0 ? cov / std::sqrt(var * pvar) : 0.0;
      if (r > best.correlation) best = KeyEstimate{tonic, mode, r};
    }
  }
  return best;
}

std::optional<Value> value_at(Viewpoint vp, std::span<const int> pitches, std::span<const int> metrical,
                              const std::optional<KeyEstimate>& key, std::size_t t, int pitch) {
  const auto interval = [&]() -> std::optional<int> {
    if (t == 0) return std::nullopt;
    return pitch - pitches[t - 1];
  };
  const auto degree = [&]() {
    if (!key) throw std::invalid_argument(std::string("viewpoint ") + std::string(tag(vp)) + " needs a key estimate");
    return octave_invariant(pitch - key->tonic);
  };
  switch (vp) {
    case Viewpoint::P: return Value{pitch, 0};
    case Viewpoint::I:
      if (auto i = interval()) return Value{*i, 0};
      return std::nullopt;
    case Viewpoint::O:
      if (auto i = interval()) return Value{octave_invariant(*i), 0};
      return std::nullopt;
    case Viewpoint::C:
      if (auto i = interval()) return Value{contour(*i), 0};
      return std::nullopt;
    case Viewpoint::X:
      if (auto i = interval()) return Value{extended_contour(*i), 0};
      return std::nullopt;
    case Viewpoint::M: return Value{metrical[t], 0};
    case Viewpoint::K: {
      const int d = degree();
      return Value{static_cast<int>(key->mode), d};
    }
    case Viewpoint::T: return Value{degree(), 0};
    case Viewpoint::F1:
    case Viewpoint::F2:
    case Viewpoint::F3: {
      const auto anchor = static_cast<std::size_t>(*anchor_index(vp));
      if (t <= anchor) return std::nullopt;
      return Value{pitch - pitches[anchor], 0};
    }
    case Viewpoint::MP: return Value{metrical[t], pitch};
    case Viewpoint::MK: {
      const int d = degree();
      return Value{metrical[t], static_cast<int>(key->mode) * 12 + d};
    }
    case Viewpoint::MT: return Value{metrical[t], degree()};
  }
  return std::nullopt;
}

std::vector<std::optional<Value>> derive(const EventSequence& seq, Viewpoint vp, const std::optional<KeyEstimate>& key) {
  if (needs_key(vp) && !key) {
    throw std::invalid_argument(std::string("viewpoint ") + std::string(tag(vp)) + " needs a key estimate");
  }
  const auto pitches = seq.pitches();
  std::vector<int> metrical;
  if (vp == Viewpoint::M || is_linked(vp)) metrical = metrical_weights(seq);
  std::vector<std::optional<Value>> out;
  out.reserve(pitches.size());
  for (std::size_t t = 0; t < pitches.size(); ++t) out.push_back(value_at(vp, pitches, metrical, key, t, pitches[t]));
  return out;
}

std::array<std::vector<std::optional<Value>>, 3> derive_first_three(const EventSequence& seq) {
  return {derive(seq, Viewpoint::F1), derive(seq, Viewpoint::F2), derive(seq, Viewpoint::F3)};
}

}  // namespace pulse
