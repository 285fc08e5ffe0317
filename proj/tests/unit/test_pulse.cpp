#include <doctest.h>

#include <cmath>
#include <random>

#include "pulse/pulse.hpp"
#include "support/fixtures.hpp"

using namespace pulse;

namespace {

BasisFeature P(int sigma, int v) { return {Viewpoint::P, sigma, Value{v, 0}}; }

Corpus small_markov_corpus(std::uint64_t seed, std::size_t n = 20, std::size_t len = 24) {
  std::mt19937_64 rng(seed);
  return testing::five_state_chain().corpus(rng, n, len);
}

LtmConfig small_ltm() {
  LtmConfig cfg;
  cfg.spec = NPlusSpec::parse("P*");
  cfg.reg.lambda1 = 0.5;
  cfg.outer.max_iterations = 4;
  return cfg;
}

}  // namespace

TEST_SUITE("pulse") {
  TEST_CASE("regularization factors") {
    CHECK(regularization_factor(RegKind::Constant, 3.0, 4) == 1.0);
    CHECK(regularization_factor(RegKind::Linear, 0.5, 4) == 2.0);
    CHECK(regularization_factor(RegKind::Linear, 0.5, 0) == 0.0);
    CHECK(regularization_factor(RegKind::LinearNoZero, 0.5, 0) == 1.0);
    CHECK(regularization_factor(RegKind::Polynomial, 2.0, 3) == 9.0);
    CHECK(regularization_factor(RegKind::Exponential, 2.0, 3) == 8.0);
    CHECK(regularization_factor(RegKind::Exponential, 2.0, 0) == 1.0);
    CHECK(regularization_factor(RegKind::ExponentialWithZero, 2.0, 0) == 0.0);
    CHECK(regularization_factor(RegKind::ExponentialWithZero, 2.0, 2) == 4.0);
    CHECK(per_feature_factor(CompoundFeature{P(0, 60), P(2, 62)}, RegKind::Exponential, 2.0) == 4.0);
    CHECK(decayed_lambda(2.0, 100.0, 100.0) == doctest::Approx(2.0 / std::exp(1.0)));
    CHECK(parse_reg_kind(to_string(RegKind::LinearNoZero)) == RegKind::LinearNoZero);
    CHECK_THROWS(parse_reg_kind("cubic"));
  }

  TEST_CASE("outer criteria") {
    FeatureSet a;
    FeatureSet b;
    CHECK(fluctuation_converged(a, b, 0.01));
    CHECK(set_size_converged(0, 0, 0.01));
    for (int p = 0; p < 99; ++p) a.add(CompoundFeature{P(0, p)});
    b = a;
    b.add(CompoundFeature{P(0, 120)});
    CHECK(symmetric_difference(a, b) == 1);
    CHECK(symmetric_difference(b, a) == 1);
    // 1 < 0.01 * 100 fails, 1 < 0.02 * 100 holds.
    CHECK_FALSE(fluctuation_converged(b, a, 0.01));
    CHECK(fluctuation_converged(b, a, 0.02));
    CHECK(set_size_converged(100, 100, 0.01));
    CHECK_FALSE(set_size_converged(100, 98, 0.01));
    CHECK(parse_outer_criterion("validation_ema") == OuterCriterion::ValidationEma);
  }

  TEST_CASE("long-term training yields a reproducible, shrunk model") {
    const Corpus corpus = small_markov_corpus(1);
    const LtmConfig cfg = small_ltm();
    const auto r = fit_ltm(corpus, cfg);
    CHECK_FALSE(r.log.empty());
    CHECK(r.log.size() <= 4);
    CHECK(r.model.features.size() > 0);
    for (double w : r.model.features.weights()) CHECK(w != 0.0);
    CHECK(r.model.alphabet == corpus.alphabet());
    CHECK(r.model.iterations == r.log.size());
    CHECK(r.model.corpus_hash == corpus_hash(corpus));
    CHECK(r.log.front().candidates == corpus.alphabet().size());

    const auto again = fit_ltm(corpus, cfg);
    CHECK(again.model.features.features() == r.model.features.features());
    CHECK(again.model.features.weights() == r.model.features.weights());

    LtmConfig threaded = cfg;
    threaded.threads = 3;
    const auto t3 = fit_ltm(corpus, threaded);
    CHECK(t3.model.features.weights() == r.model.features.weights());
  }

  TEST_CASE("without shrinking zero-weight features stay in the set") {
    const Corpus corpus = small_markov_corpus(2);
    LtmConfig cfg = small_ltm();
    cfg.reg.lambda1 = 5.0;
    cfg.outer.max_iterations = 2;
    cfg.shrink = false;
    const auto r = fit_ltm(corpus, cfg);
    std::size_t zeros = 0;
    for (double w : r.model.features.weights()) zeros += w == 0.0;
    CHECK(zeros > 0);
  }

  TEST_CASE("the feature cap stops the outer loop") {
    const Corpus corpus = small_markov_corpus(3);
    LtmConfig cfg = small_ltm();
    cfg.reg.lambda1 = 0.0;
    cfg.feature_cap = 10;
    const auto r = fit_ltm(corpus, cfg);
    CHECK(r.stop == OuterStop::FeatureCap);
    CHECK_FALSE(r.model.converged);
  }

  TEST_CASE("validation criterion records held-out bits") {
    const Corpus corpus = small_markov_corpus(4);
    LtmConfig cfg = small_ltm();
    cfg.outer.criterion = OuterCriterion::ValidationEma;
    const auto r = fit_ltm(corpus, cfg);
    for (const auto& e : r.log) CHECK(e.validation_bits > 0.0);
    CHECK_THROWS(fit_ltm(Corpus({make_sequence("a", {60, 62})}), cfg));
  }

  TEST_CASE("predictions are normalized and predict_next agrees with predict_corpus") {
    const Corpus corpus = small_markov_corpus(5);
    const auto model = fit_ltm(corpus, small_ltm()).model;
    const auto dists = predict_corpus(model, corpus, 2);
    REQUIRE(dists.size() == corpus.size());
    const auto& seq = corpus.sequences().front();
    for (std::size_t t = 0; t < seq.size(); ++t) {
      double sum = 0.0;
      for (double p : dists[0][t].probs()) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto pitches = seq.pitches();
    const std::size_t t = 7;
    const auto next = predict_next(model, std::span<const int>(pitches.data(), t), std::nullopt);
    for (std::size_t y = 0; y < next.size(); ++y) CHECK(next[y] == doctest::Approx(dists[0][t][y]).epsilon(1e-12));
  }

  TEST_CASE("the short-term model is causal and starts uniform") {
    const auto chain = testing::five_state_chain();
    std::mt19937_64 rng(6);
    const auto seq = chain.corpus(rng, 1, 40).sequences().front();
    const StmConfig cfg;
    const auto dists = fit_predict_stm(seq, chain.states, cfg);
    REQUIRE(dists.size() == seq.size());
    for (double p : dists[0].probs()) CHECK(p == doctest::Approx(0.2));
    for (const auto& d : dists) {
      double sum = 0.0;
      for (double p : d.probs()) sum += p;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Changing the last event cannot change any earlier prediction.
    auto altered = seq;
    altered.events.back().pitch = altered.events.back().pitch == 60 ? 62 : 60;
    const auto dists2 = fit_predict_stm(altered, chain.states, cfg);
    for (std::size_t t = 0; t < seq.size(); ++t) CHECK(dists2[t].probs() == dists[t].probs());

    StmConfig keyed;
    keyed.spec = NPlusSpec::parse("P K");
    CHECK_THROWS_AS(fit_predict_stm(seq, chain.states, keyed), std::invalid_argument);
    CHECK_THROWS_AS(fit_predict_stm(make_sequence("x", {60, 99}), chain.states, cfg), std::invalid_argument);
  }

  TEST_CASE("the short-term model learns a repeated pattern") {
    std::vector<int> pitches;
    for (int i = 0; i < 12; ++i) pitches.insert(pitches.end(), {60, 64, 67});
    const auto seq = make_sequence("arp", pitches);
    const auto dists = fit_predict_stm(seq, {60, 64, 67}, StmConfig{});
    double late = 0.0;
    for (std::size_t t = 24; t < pitches.size(); ++t) late += dists[t].bits(static_cast<std::size_t>(
        pitches[t] == 60 ? 0 : pitches[t] == 64 ? 1 : 2));
    CHECK(late / 12.0 < 0.5);
  }

  TEST_CASE("corpus hashes distinguish corpora") {
    const Corpus a({make_sequence("a", {60, 62})});
    const Corpus b({make_sequence("a", {60, 64})});
    CHECK(corpus_hash(a) == corpus_hash(a));
    CHECK(corpus_hash(a) != corpus_hash(b));
    CHECK(corpus_hash(a).size() == 16);
  }
}
