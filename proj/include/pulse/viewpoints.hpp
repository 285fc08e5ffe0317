#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pulse/corpus.hpp"

namespace pulse {

// Derived views of a melody. F1/F2/F3 are the first-, second- and
// third-in-piece anchors; the F123 family is the three of them together.
// MP/MK/MT pair the metrical weight with pitch, key and tonic values.
enum class Viewpoint : std::uint8_t { P, I, O, C, X, M, K, T, F1, F2, F3, MP, MK, MT };

inline constexpr std::size_t kViewpointCount = 14;

inline constexpr std::array<Viewpoint, kViewpointCount> kAllViewpoints{
    Viewpoint::P,  Viewpoint::I,  Viewpoint::O,  Viewpoint::C,  Viewpoint::X,  Viewpoint::M,  Viewpoint::K,
    Viewpoint::T,  Viewpoint::F1, Viewpoint::F2, Viewpoint::F3, Viewpoint::MP, Viewpoint::MK, Viewpoint::MT,
};

std::string_view tag(Viewpoint vp);
std::optional<Viewpoint> parse_viewpoint(std::string_view tag);

constexpr std::size_t index(Viewpoint vp) { return static_cast<std::size_t>(vp); }

// Viewpoints that may carry a time offset > 0.
constexpr bool is_sequential(Viewpoint vp) { return vp <= Viewpoint::X; }
// False only for M: its value does not depend on the predicted event.
constexpr bool is_predictive(Viewpoint vp) { return vp != Viewpoint::M; }
constexpr bool needs_key(Viewpoint vp) {
  return vp == Viewpoint::K || vp == Viewpoint::T || vp == Viewpoint::MK || vp == Viewpoint::MT;
}
constexpr bool is_linked(Viewpoint vp) { return vp >= Viewpoint::MP; }
constexpr bool is_anchored(Viewpoint vp) { return vp >= Viewpoint::K && vp <= Viewpoint::F3; }

enum class Mode : std::uint8_t { Major = 0, Minor = 1 };

// Scalar viewpoints use `a` only. K: a = mode, b = degree. Linked types:
// a = metrical weight, b = inner value (for MK, mode * 12 + degree).
struct Value {
  std::int32_t a = 0;
  std::int32_t b = 0;

  auto operator<=>(const Value&) const = default;
};

std::string format_value(Viewpoint vp, Value v);
std::optional<Value> parse_value(Viewpoint vp, std::string_view text);

struct KeyEstimate {
  int tonic = 0;
  Mode mode = Mode::Major;
  double correlation = 0.0;

  bool operator==(const KeyEstimate&) const = default;
};

struct KeyProfiles {
  std::array<double, 12> major{};
  std::array<double, 12> minor{};

  // 24 whitespace-separated reals: 12 major then 12 minor.
  static KeyProfiles parse(std::istream& in);
  static KeyProfiles load(const std::filesystem::path& path);
  // The profile file shipped in the data directory.
  static const KeyProfiles& shipped();
  bool operator==(const KeyProfiles&) const = default;
};

int octave_invariant(int interval);
int contour(int interval);
int extended_contour(int interval);

// Count of nested bar grids (coarsest = whole bar, finest spacing = shortest
// duration of the piece) whose points contain the onset; at least 1.
std::vector<int> metrical_weights(const EventSequence& seq);

// Krumhansl-Schmuckler: argmax of Pearson correlation between the
// pitch-class histogram and the 24 rotated profiles. Ties go to the lowest
// tonic, Major first. A histogram with fewer than two pitch classes or zero
// variance yields (first pitch class, Major, 0).
KeyEstimate find_key(const EventSequence& seq, const KeyProfiles& profiles, bool duration_weighted = true);

// Value of `vp` at position t when the event there has pitch `pitch`.
// Positions before t are read from `pitches`; `metrical` must cover t.
std::optional<Value> value_at(Viewpoint vp, std::span<const int> pitches, std::span<const int> metrical,
                              const std::optional<KeyEstimate>& key, std::size_t t, int pitch);

// One entry per event; nullopt where the viewpoint is undefined. Throws
// std::invalid_argument when a key-dependent viewpoint gets no key.
std::vector<std::optional<Value>> derive(const EventSequence& seq, Viewpoint vp,
                                         const std::optional<KeyEstimate>& key = std::nullopt);

// The three first-three-in-piece streams (anchors 0, 1, 2).
std::array<std::vector<std::optional<Value>>, 3> derive_first_three(const EventSequence& seq);

}  // namespace pulse
