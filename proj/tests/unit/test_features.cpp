#include <doctest.h>

#include <random>

#include "pulse/features.hpp"
#include "support/fixtures.hpp"

using namespace pulse;

namespace {

BasisFeature P(int sigma, int v) { return {Viewpoint::P, sigma, Value{v, 0}}; }
BasisFeature I(int sigma, int v) { return {Viewpoint::I, sigma, Value{v, 0}}; }

}  // namespace

TEST_SUITE("features") {
  TEST_CASE("canonical order and derived properties") {
    const CompoundFeature f{P(0, 60), I(3, 2), I(1, -1)};
    CHECK(f.basis()[0] == P(0, 60));
    CHECK(f.basis()[1] == I(3, 2));
    CHECK(f.basis()[2] == I(1, -1));
    CHECK(f.length() == 3);
    CHECK(f.max_sigma() == 3);
    CHECK(f.holes() == 1);
    CHECK_FALSE(f.contiguous());
    CHECK(CompoundFeature{P(0, 60), P(1, 62), P(2, 64)}.holes() == 0);
    CHECK(CompoundFeature{P(0, 60), P(2, 64)}.holes() == 1);
  }

  TEST_CASE("invalid compounds are rejected") {
    CHECK_THROWS_AS(CompoundFeature(std::vector<BasisFeature>{}), std::invalid_argument);
    CHECK_THROWS_AS((CompoundFeature{P(1, 60)}), std::invalid_argument);
    CHECK_THROWS_AS((CompoundFeature{P(0, 60), P(0, 62)}), std::invalid_argument);
    CHECK_THROWS_AS((CompoundFeature{BasisFeature{Viewpoint::M, 0, Value{2, 0}}}), std::invalid_argument);
    CHECK_THROWS_AS((CompoundFeature{P(0, 60), BasisFeature{Viewpoint::K, 1, Value{0, 0}}}), std::invalid_argument);
    CHECK_THROWS_AS((CompoundFeature{BasisFeature{Viewpoint::C, 0, Value{3, 0}}}), std::invalid_argument);
    CHECK_THROWS_AS((CompoundFeature{P(0, 128)}), std::invalid_argument);
    // M is fine next to a predictive basis.
    CHECK_NOTHROW(CompoundFeature{P(0, 60), BasisFeature{Viewpoint::M, 0, Value{2, 0}}});
  }

  TEST_CASE("text form round trips") {
    const CompoundFeature f{P(0, 60), I(1, -2), BasisFeature{Viewpoint::MK, 0, Value{3, 16}}};
    const std::string text = format_feature(f);
    CHECK(text == "P[σ=0,ν=60] & I[σ=1,ν=-2] & MK[σ=0,ν=3:m4]");
    CHECK(parse_feature(text) == f);
    CHECK(parse_feature("I[s=1,v=-2] & P[s=0,v=60]") == CompoundFeature{P(0, 60), I(1, -2)});
    CHECK_THROWS_AS(parse_feature("P[σ=0]"), std::invalid_argument);
    CHECK_THROWS_AS(parse_feature("Q[σ=0,ν=1]"), std::invalid_argument);
  }

  TEST_CASE("feature sets reject duplicates and keep order on select") {
    FeatureSet fs;
    CHECK(fs.add(CompoundFeature{P(0, 60)}, 1.0));
    CHECK(fs.add(CompoundFeature{P(0, 62)}, 2.0));
    CHECK_FALSE(fs.add(CompoundFeature{P(0, 60)}, 5.0));
    CHECK(fs.size() == 2);
    CHECK(fs.find(CompoundFeature{P(0, 62)}) == 1u);
    const auto sel = fs.select({false, true});
    CHECK(sel.size() == 1);
    CHECK(sel.weights()[0] == 2.0);
    CHECK(sel.contains(CompoundFeature{P(0, 62)}));
  }

  TEST_CASE("evaluate matches the definition") {
    const auto seq = make_sequence("s", {60, 62, 64, 62});
    const SequenceContext ctx(seq, std::nullopt);
    const CompoundFeature f{P(0, 62), P(1, 64)};
    CHECK(evaluate(f, ctx, 3, 62));
    CHECK_FALSE(evaluate(f, ctx, 3, 60));
    CHECK_FALSE(evaluate(f, ctx, 2, 62));
    CHECK_FALSE(evaluate(f, ctx, 0, 62));
    const CompoundFeature step{I(0, 2), I(1, 2)};
    CHECK(evaluate(step, ctx, 2, 64));
    CHECK_FALSE(evaluate(step, ctx, 1, 62));
  }

  TEST_CASE("build_matrix agrees with evaluate and ignores thread count") {
    std::vector<EventSequence> seqs{make_sequence("a", {60, 62, 64, 62, 60, 67}), make_sequence("b", {64, 64, 62, 60})};
    const Corpus corpus(seqs);
    const Dataset ds = Dataset::from_corpus(corpus, &KeyProfiles::shipped());
    std::vector<CompoundFeature> fs{
        CompoundFeature{P(0, 60)},
        CompoundFeature{P(0, 62), P(1, 64)},
        CompoundFeature{I(0, -2), I(2, 2)},
        CompoundFeature{BasisFeature{Viewpoint::C, 0, Value{-1, 0}}},
        CompoundFeature{BasisFeature{Viewpoint::K, 0, Value{0, 0}}},
        CompoundFeature{BasisFeature{Viewpoint::MP, 0, Value{3, 60}}},
        CompoundFeature{P(0, 64), BasisFeature{Viewpoint::M, 0, Value{1, 0}}},
    };
    const FeatureMatrix m = build_matrix(ds, fs, 1);
    CHECK(m == build_matrix(ds, fs, 3));
    REQUIRE(m.data() == ds.data.size());
    for (std::size_t d = 0; d < ds.data.size(); ++d) {
      const auto& ctx = ds.contexts[ds.data[d].sequence];
      CHECK(m.truth(d) == ds.truth(d));
      for (std::size_t f = 0; f < fs.size(); ++f) {
        for (std::size_t y = 0; y < ds.alphabet.size(); ++y) {
          CHECK(m.at(d, f, y) == evaluate(fs[f], ctx, ds.data[d].t, ds.alphabet[y]));
        }
      }
    }
  }

  TEST_CASE("key features without key estimates are an error") {
    const Corpus corpus({make_sequence("a", {60, 62})});
    const Dataset ds = Dataset::from_corpus(corpus, nullptr);
    std::vector<CompoundFeature> fs{CompoundFeature{BasisFeature{Viewpoint::T, 0, Value{0, 0}}}};
    CHECK_THROWS_AS(build_matrix(ds, fs), std::invalid_argument);
  }

  TEST_CASE("column selection, appending and relevance filtering") {
    std::mt19937_64 rng(3);
    const FeatureMatrix a = testing::random_matrix(rng, 6, 4, 3);
    const FeatureMatrix b = testing::random_matrix(rng, 6, 2, 3);
    const FeatureMatrix ab = a.append_columns(b);
    CHECK(ab.features() == 6);
    for (std::size_t d = 0; d < 6; ++d) {
      for (std::size_t y = 0; y < 3; ++y) {
        for (std::size_t f = 0; f < 4; ++f) CHECK(ab.at(d, f, y) == a.at(d, f, y));
        for (std::size_t f = 0; f < 2; ++f) CHECK(ab.at(d, 4 + f, y) == b.at(d, f, y));
      }
    }
    const FeatureMatrix back = ab.select_columns({0, 1, 2, 3, -1, -1}, 4);
    CHECK(back == a);
    const FeatureMatrix swapped = a.select_columns({3, 2, 1, 0}, 4);
    CHECK(swapped.at(0, 3, 1) == a.at(0, 0, 1));

    FeatureMatrix m(3, 2);
    m.append_row({{2, 1}, {0, 0}, {0, 0}}, 1);
    m.append_row({{2, 0}}, 0);
    CHECK(m.nonzeros() == 3);
    FeatureSet fs;
    fs.add(CompoundFeature{P(0, 60)});
    fs.add(CompoundFeature{P(0, 61)});
    fs.add(CompoundFeature{P(0, 62)});
    const auto [kept, km] = filter_irrelevant(fs, m);
    CHECK(kept.size() == 2);
    CHECK_FALSE(kept.contains(CompoundFeature{P(0, 61)}));
    CHECK(km.at(0, 1, 1));
  }
}
