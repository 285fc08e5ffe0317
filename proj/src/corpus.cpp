#include "pulse/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pulse/error.hpp"

namespace pulse {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

bool parse_rational(std::string_view s, Rational& out) {
  const auto slash = s.find('/');
  std::int64_t num = 0;
  std::int64_t den = 1;
  if (slash == std::string_view::npos) {
    if (!parse_int(s, num)) return false;
  } else {
    if (!parse_int(s.substr(0, slash), num) || !parse_int(s.substr(slash + 1), den) || den == 0) return false;
  }
  out = Rational(num, den);
  return true;
}

}  // namespace

std::vector<int> EventSequence::pitches() const {
  std::vector<int> p;
  p.reserve(events.size());
  for (const auto& e : events) p.push_back(e.pitch);
  return p;
}

void validate(const EventSequence& seq) {
  const auto fail = [&](const std::string& what) { throw ValidationError("sequence '" + seq.id + "': " + what); };
  if (seq.id.empty()) throw ValidationError("sequence with empty id");
  if (seq.events.empty()) fail("no events");
  if (seq.time_signature.numerator < 1 || seq.time_signature.denominator < 1) fail("invalid time signature");
  if (seq.anacrusis < 0) fail("negative anacrusis");
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    const Event& e = seq.events[i];
    if (e.pitch < 0 || e.pitch > 127) fail("pitch out of range at event " + std::to_string(i));
    if (e.duration <= 0) fail("non-positive duration at event " + std::to_string(i));
    if (i > 0 && e.onset <= seq.events[i - 1].onset) fail("onsets not strictly increasing at event " + std::to_string(i));
  }
}

EventSequence make_sequence(std::string id, const std::vector<int>& pitches, Rational duration, TimeSignature ts,
                            Rational anacrusis) {
  EventSequence seq;
  seq.id = std::move(id);
  seq.time_signature = ts;
  seq.anacrusis = anacrusis;
  Rational onset(0);
  for (int p : pitches) {
    seq.events.push_back(Event{p, onset, duration});
    onset += duration;
  }
  return seq;
}

std::vector<int> occurring_pitches(const std::vector<EventSequence>& sequences) {
  std::set<int> pitches;
  for (const auto& s : sequences) {
    for (const auto& e : s.events) pitches.insert(e.pitch);
  }
  return {pitches.begin(), pitches.end()};
}

Corpus::Corpus(std::vector<EventSequence> sequences) : sequences_(std::move(sequences)) {
  alphabet_ = occurring_pitches(sequences_);
}

Corpus::Corpus(std::vector<EventSequence> sequences, std::vector<int> alphabet)
    : sequences_(std::move(sequences)), alphabet_(std::move(alphabet)) {
  if (!std::is_sorted(alphabet_.begin(), alphabet_.end()) ||
      std::adjacent_find(alphabet_.begin(), alphabet_.end()) != alphabet_.end()) {
    throw std::invalid_argument("alphabet must be sorted and free of duplicates");
  }
  for (const auto& s : sequences_) {
    for (const auto& e : s.events) {
      if (outcome_index(e.pitch) < 0) {
        throw ValidationError("sequence '" + s.id + "': pitch " + std::to_string(e.pitch) + " not in alphabet");
      }
    }
  }
}

std::size_t Corpus::event_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences_) n += s.size();
  return n;
}

int Corpus::outcome_index(int pitch) const {
  const auto it = std::lower_bound(alphabet_.begin(), alphabet_.end(), pitch);
  if (it == alphabet_.end() || *it != pitch) return -1;
  return static_cast<int>(it - alphabet_.begin());
}

Corpus Corpus::subset(const std::vector<std::size_t>& indices) const {
  std::vector<EventSequence> seqs;
  seqs.reserve(indices.size());
  for (std::size_t i : indices) seqs.push_back(sequences_.at(i));
  return Corpus(std::move(seqs), alphabet_);
}

EventSequence parse_sequence_line(std::string_view line, std::string_view source, std::size_t line_no) {
  const std::string src(source);
  const auto fail = [&](const std::string& what) -> EventSequence { throw ParseError(src, line_no, what); };

  const auto bar = line.find('|');
  if (bar == std::string_view::npos) return fail("missing '|' separator");
  const auto header = split_ws(line.substr(0, bar));
  if (header.size() != 3) return fail("header must be '<id> <ts-num>/<ts-den> <anacrusis>'");

  EventSequence seq;
  seq.id = std::string(header[0]);
  const auto ts = split(header[1], '/');
  std::int64_t num = 0;
  std::int64_t den = 0;
  if (ts.size() != 2 || !parse_int(ts[0], num) || !parse_int(ts[1], den)) return fail("bad time signature");
  seq.time_signature = TimeSignature{static_cast<int>(num), static_cast<int>(den)};
  if (!parse_rational(header[2], seq.anacrusis)) return fail("bad anacrusis");

  const auto body = trim(line.substr(bar + 1));
  if (!body.empty()) {
    for (auto item : split(body, ',')) {
      item = trim(item);
      const auto parts = split(item, ':');
      std::int64_t pitch = 0;
      Event e;
      if (parts.size() != 3 || !parse_int(parts[0], pitch) || !parse_rational(parts[1], e.onset) ||
          !parse_rational(parts[2], e.duration)) {
        return fail("bad event '" + std::string(item) + "'");
      }
      e.pitch = static_cast<int>(pitch);
      seq.events.push_back(e);
    }
  }
  try {
    validate(seq);
  } catch (const ValidationError& e) {
    throw ValidationError(src + ":" + std::to_string(line_no) + ": " + e.what());
  }
  return seq;
}

Corpus parse_corpus(std::istream& in, std::string_view source) {
  std::vector<EventSequence> seqs;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto seq = parse_sequence_line(line, source, line_no);
    if (!ids.insert(seq.id).second) throw ValidationError("duplicate sequence id '" + seq.id + "'");
    seqs.push_back(std::move(seq));
  }
  if (seqs.empty()) throw ValidationError("empty corpus");
  return Corpus(std::move(seqs));
}

Corpus ingest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path.string());
  return parse_corpus(in, path.string());
}

std::string format_rational(const Rational& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

std::string serialize_sequence(const EventSequence& seq) {
  std::ostringstream out;
  out << seq.id << ' ' << seq.time_signature.numerator << '/' << seq.time_signature.denominator << ' '
      << format_rational(seq.anacrusis) << " |";
  for (std::size_t i = 0; i < seq.events.size(); ++i) {
    const Event& e = seq.events[i];
    out << (i == 0 ? " " : " , ") << e.pitch << ':' << format_rational(e.onset) << ':' << format_rational(e.duration);
  }
  return out.str();
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& s : corpus.sequences()) out << serialize_sequence(s) << '\n';
}

FoldAssignment split_folds(const Corpus& corpus, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > corpus.size()) {
    throw std::invalid_argument("fold count " + std::to_string(k) + " outside [2, " + std::to_string(corpus.size()) +
                                "]");
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldAssignment folds;
  folds.k = k;
  for (std::size_t pos = 0; pos < order.size(); ++pos) folds.assignment[corpus.sequences()[order[pos]].id] = pos % k;
  return folds;
}

FoldAssignment parse_folds(std::istream& in, std::string_view source) {
  FoldAssignment folds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto parts = split_ws(line);
    std::int64_t idx = 0;
    if (parts.size() != 2 || !parse_int(parts[1], idx) || idx < 0) {
      throw ParseError(std::string(source), line_no, "expected '<sequence-id> <fold-index>'");
    }
    if (!folds.assignment.emplace(std::string(parts[0]), static_cast<std::size_t>(idx)).second) {
      throw ParseError(std::string(source), line_no, "sequence '" + std::string(parts[0]) + "' assigned twice");
    }
    folds.k = std::max(folds.k, static_cast<std::size_t>(idx) + 1);
  }
  return folds;
}

FoldAssignment load_folds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fold file " + path.string());
  return parse_folds(in, path.string());
}

void write_folds(std::ostream& out, const FoldAssignment& folds) {
  for (const auto& [id, fold] : folds.assignment) out << id << ' ' << fold << '\n';
}

const FoldAssignment& validate_folds(const Corpus& corpus, const FoldAssignment& folds) {
  if (folds.k < 2) throw ValidationError("fold assignment needs at least two folds");
  std::vector<std::size_t> sizes(folds.k, 0);
  for (const auto& s : corpus.sequences()) {
    const auto it = folds.assignment.find(s.id);
    if (it == folds.assignment.end()) throw ValidationError("sequence '" + s.id + "' has no fold");
    if (it->second >= folds.k) throw ValidationError("sequence '" + s.id + "' has fold index out of range");
    ++sizes[it->second];
  }
  if (folds.assignment.size() != corpus.size()) {
    for (const auto& [id, fold] : folds.assignment) {
      const bool known = std::any_of(corpus.sequences().begin(), corpus.sequences().end(),
                                     [&](const EventSequence& s) { return s.id == id; });
      if (!known) throw ValidationError("fold file names unknown sequence '" + id + "'");
    }
  }
  for (std::size_t f = 0; f < folds.k; ++f) {
    if (sizes[f] == 0) throw ValidationError("fold " + std::to_string(f) + " is empty");
  }
  return folds;
}

std::pair<Corpus, Corpus> train_test_split(const Corpus& corpus, const FoldAssignment& folds, std::size_t test_fold) {
  if (test_fold >= folds.k) {
    throw std::invalid_argument("test fold " + std::to_string(test_fold) + " outside [0, " + std::to_string(folds.k) +
                                ")");
  }
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto it = folds.assignment.find(corpus.sequences()[i].id);
    if (it == folds.assignment.end()) throw ValidationError("sequence '" + corpus.sequences()[i].id + "' has no fold");
    (it->second == test_fold ? test : train).push_back(i);
  }
  return {corpus.subset(train), corpus.subset(test)};
}

}  // namespace pulse
