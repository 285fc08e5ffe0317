#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pulse {

// Positions and lengths in quarter notes.
using Rational = boost::rational<std::int64_t>;

struct Event {
  int pitch = 60;
  Rational onset{0};
  Rational duration{1};

  bool operator==(const Event&) const = default;
};

struct TimeSignature {
  int numerator = 4;
  int denominator = 4;

  Rational bar_length() const { return Rational(4 * numerator, denominator); }
  bool operator==(const TimeSignature&) const = default;
};

struct EventSequence {
  std::string id;
  std::vector<Event> events;
  TimeSignature time_signature;
  // Length of the pickup before the first full bar.
  Rational anacrusis{0};

  std::size_t size() const { return events.size(); }
  std::vector<int> pitches() const;
  bool operator==(const EventSequence&) const = default;
};

// Throws ValidationError naming the sequence id on: empty events, bad time
// signature, non-positive duration, pitch outside 0..127, onsets not
// strictly increasing.
void validate(const EventSequence& seq);

// Builds a monophonic sequence of back-to-back notes of equal length.
EventSequence make_sequence(std::string id, const std::vector<int>& pitches, Rational duration = Rational(1),
                            TimeSignature ts = {}, Rational anacrusis = Rational(0));

class Corpus {
 public:
  Corpus() = default;
  // Alphabet derived from the sequences.
  explicit Corpus(std::vector<EventSequence> sequences);
  // Alphabet supplied by a parent corpus; must cover every occurring pitch.
  Corpus(std::vector<EventSequence> sequences, std::vector<int> alphabet);

  const std::vector<EventSequence>& sequences() const { return sequences_; }
  const std::vector<int>& alphabet() const { return alphabet_; }
  std::size_t size() const { return sequences_.size(); }
  bool empty() const { return sequences_.empty(); }
  std::size_t event_count() const;

  // Index of `pitch` in the alphabet, or -1.
  int outcome_index(int pitch) const;

  Corpus subset(const std::vector<std::size_t>& indices) const;

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<EventSequence> sequences_;
  std::vector<int> alphabet_;
};

std::vector<int> occurring_pitches(const std::vector<EventSequence>& sequences);

// One sequence per line:
//   <id> <ts-num>/<ts-den> <anacrusis> | p:onset:duration , p:onset:duration , ...
// Rationals are written n/d or n. Blank lines are ignored.
EventSequence parse_sequence_line(std::string_view line, std::string_view source = "<string>",
                                  std::size_t line_no = 0);
Corpus parse_corpus(std::istream& in, std::string_view source = "<stream>");
Corpus ingest(const std::filesystem::path& path);

std::string format_rational(const Rational& r);
std::string serialize_sequence(const EventSequence& seq);
void write_corpus(std::ostream& out, const Corpus& corpus);

struct FoldAssignment {
  std::size_t k = 0;
  std::map<std::string, std::size_t> assignment;

  bool operator==(const FoldAssignment&) const = default;
};

// Seeded shuffle, then round-robin; fold sizes differ by at most one.
// Requires 1 < k <= |sequences|.
FoldAssignment split_folds(const Corpus& corpus, std::size_t k, std::uint64_t seed);

// Lines of `<sequence-id> <fold-index>`; k = 1 + the largest index.
FoldAssignment parse_folds(std::istream& in, std::string_view source = "<stream>");
FoldAssignment load_folds(const std::filesystem::path& path);
void write_folds(std::ostream& out, const FoldAssignment& folds);

// Checks that every corpus sequence is assigned exactly once, no unknown ids
// appear and every fold is non-empty. Returns the assignment unchanged.
const FoldAssignment& validate_folds(const Corpus& corpus, const FoldAssignment& folds);

// (train, test); both inherit the parent alphabet.
std::pair<Corpus, Corpus> train_test_split(const Corpus& corpus, const FoldAssignment& folds,
                                           std::size_t test_fold);

}  // namespace pulse
