#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pulse/corpus.hpp"
#include "pulse/features.hpp"

namespace pulse::testing {

// Dense random binary tensor with a random truth per row.
inline FeatureMatrix random_matrix(std::mt19937_64& rng, std::size_t data, std::size_t features, std::size_t outcomes,
                                   double density = 0.3) {
  std::bernoulli_distribution fire(density);
  std::uniform_int_distribution<int> truth(0, static_cast<int>(outcomes) - 1);
  FeatureMatrix m(features, outcomes);
  for (std::size_t d = 0; d < data; ++d) {
    std::vector<FeatureMatrix::Entry> cells;
    for (std::uint32_t f = 0; f < features; ++f) {
      for (std::uint32_t y = 0; y < outcomes; ++y) {
        if (fire(rng)) cells.push_back({f, y});
      }
    }
    m.append_row(std::move(cells), truth(rng));
  }
  return m;
}

inline std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> w(n);
  for (auto& x : w) x = g(rng);
  return w;
}

// First-order Markov chain over `states` with row-stochastic `transition`.
struct MarkovChain {
  std::vector<int> states;
  std::vector<std::vector<double>> transition;
  std::vector<double> initial;

  // Stationary distribution by power iteration.
  std::vector<double> stationary() const {
    const std::size_t n = states.size();
    std::vector<double> pi(n, 1.0 / static_cast<double>(n));
    for (int it = 0; it < 10000; ++it) {
      std::vector<double> next(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) next[j] += pi[i] * transition[i][j];
      }
      pi = next;
    }
    return pi;
  }

  // H(X_t | X_{t-1}) in bits under the stationary distribution.
  double conditional_entropy() const {
    const auto pi = stationary();
    double h = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      for (double p : transition[i]) {
        if (p > 0.0) h -= pi[i] * p * std::log2(p);
      }
    }
    return h;
  }

  std::vector<int> sample(std::mt19937_64& rng, std::size_t length) const {
    std::vector<int> out;
    std::discrete_distribution<std::size_t> first(initial.begin(), initial.end());
    std::size_t s = first(rng);
    out.push_back(states[s]);
    for (std::size_t t = 1; t < length; ++t) {
      std::discrete_distribution<std::size_t> step(transition[s].begin(), transition[s].end());
      s = step(rng);
      out.push_back(states[s]);
    }
    return out;
  }

  Corpus corpus(std::mt19937_64& rng, std::size_t sequences, std::size_t length) const {
    std::vector<EventSequence> seqs;
    for (std::size_t i = 0; i < sequences; ++i) seqs.push_back(make_sequence("m" + std::to_string(i), sample(rng, length)));
    return Corpus(std::move(seqs), states);
  }
};

// Five states; each row concentrates on two successors.
inline MarkovChain five_state_chain() {
  MarkovChain c;
  c.states = {60, 62, 64, 65, 67};
  c.transition = {
      {0.05, 0.70, 0.15, 0.05, 0.05},
      {0.10, 0.05, 0.70, 0.10, 0.05},
      {0.05, 0.10, 0.05, 0.70, 0.10},
      {0.10, 0.05, 0.10, 0.05, 0.70},
      {0.70, 0.10, 0.05, 0.10, 0.05},
  };
  c.initial = {0.2, 0.2, 0.2, 0.2, 0.2};
  return c;
}

}  // namespace pulse::testing
