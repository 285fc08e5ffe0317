#include <doctest.h>

#include <set>
#include <sstream>

#include "pulse/corpus.hpp"
#include "pulse/error.hpp"

using namespace pulse;

namespace {

Corpus toy_corpus(std::size_t n) {
  std::vector<EventSequence> seqs;
  for (std::size_t i = 0; i < n; ++i) seqs.push_back(make_sequence("s" + std::to_string(i), {60, 62, 64 + static_cast<int>(i % 3)}));
  return Corpus(std::move(seqs));
}

}  // namespace

TEST_SUITE("corpus") {
  TEST_CASE("parse and serialize round trip") {
    const std::string text =
        "a 3/4 1/2 | 60:0:1/2 , 62:1/2:1 , 64:3/2:3/2\n"
        "\n"
        "b 4/4 0 | 67:0:1 , 65:1:1\n";
    std::istringstream in(text);
    const Corpus c = parse_corpus(in);
    REQUIRE(c.size() == 2);
    CHECK(c.alphabet() == std::vector<int>{60, 62, 64, 65, 67});
    CHECK(c.event_count() == 5);
    const auto& a = c.sequences()[0];
    CHECK(a.time_signature == TimeSignature{3, 4});
    CHECK(a.anacrusis == Rational(1, 2));
    CHECK(a.events[2].onset == Rational(3, 2));
    CHECK(a.events[2].duration == Rational(3, 2));

    std::ostringstream out;
    write_corpus(out, c);
    std::istringstream again(out.str());
    CHECK(parse_corpus(again) == c);
  }

  TEST_CASE("malformed lines report their line number") {
    std::istringstream in("a 4/4 0 | 60:0:1\nb 4/4 0 | 60:0\n");
    try {
      parse_corpus(in, "x.txt");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }

  TEST_CASE("domain violations are rejected with the sequence id") {
    auto bad = make_sequence("melody-7", {60, 62});
    bad.events[1].onset = Rational(0);
    CHECK_THROWS_WITH_AS(validate(bad), doctest::Contains("melody-7"), ValidationError);
    bad = make_sequence("p", {60, 200});
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = make_sequence("d", {60});
    bad.events[0].duration = Rational(0);
    CHECK_THROWS_AS(validate(bad), ValidationError);
    bad = make_sequence("e", {60});
    bad.events.clear();
    CHECK_THROWS_AS(validate(bad), ValidationError);

    std::istringstream dup("a 4/4 0 | 60:0:1\na 4/4 0 | 62:0:1\n");
    CHECK_THROWS_AS(parse_corpus(dup), ValidationError);
    std::istringstream empty("\n\n");
    CHECK_THROWS_AS(parse_corpus(empty), ValidationError);
  }

  TEST_CASE("supplied alphabet must cover every pitch") {
    std::vector<EventSequence> seqs{make_sequence("a", {60, 64})};
    CHECK_THROWS_AS(Corpus(seqs, {60, 62}), ValidationError);
    CHECK_THROWS_AS(Corpus(seqs, {64, 60}), std::invalid_argument);
    const Corpus c(seqs, {60, 62, 64});
    CHECK(c.outcome_index(62) == 1);
    CHECK(c.outcome_index(61) == -1);
  }

  TEST_CASE("fold split is balanced, seeded and exhaustive") {
    const Corpus c = toy_corpus(23);
    const auto f = split_folds(c, 5, 42);
    CHECK(f.k == 5);
    CHECK(f.assignment.size() == 23);
    std::vector<int> sizes(5, 0);
    for (const auto& [id, fold] : f.assignment) ++sizes[fold];
    CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
    CHECK(split_folds(c, 5, 42) == f);
    CHECK_FALSE(split_folds(c, 5, 43) == f);
    CHECK_THROWS_AS(split_folds(c, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(split_folds(c, 24, 0), std::invalid_argument);
    validate_folds(c, f);

    std::set<std::string> seen;
    for (std::size_t k = 0; k < 5; ++k) {
      const auto [train, test] = train_test_split(c, f, k);
      CHECK(train.size() + test.size() == 23);
      CHECK(train.alphabet() == c.alphabet());
      for (const auto& s : test.sequences()) CHECK(seen.insert(s.id).second);
    }
    CHECK(seen.size() == 23);
  }

  TEST_CASE("fold files round trip and are checked against the corpus") {
    const Corpus c = toy_corpus(4);
    const auto f = split_folds(c, 2, 1);
    std::ostringstream out;
    write_folds(out, f);
    std::istringstream in(out.str());
    CHECK(parse_folds(in) == f);

    std::istringstream unknown("s0 0\ns1 1\ns2 0\ns3 1\nzz 0\n");
    CHECK_THROWS_AS(validate_folds(c, parse_folds(unknown)), ValidationError);
    std::istringstream missing("s0 0\ns1 1\ns2 0\n");
    CHECK_THROWS_AS(validate_folds(c, parse_folds(missing)), ValidationError);
    std::istringstream gap("s0 0\ns1 2\ns2 0\ns3 2\n");
    CHECK_THROWS_AS(validate_folds(c, parse_folds(gap)), ValidationError);
  }
}
