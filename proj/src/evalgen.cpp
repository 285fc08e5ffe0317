#include "pulse/evalgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "pulse/parallel.hpp"

namespace pulse {
namespace {

int alphabet_index(const std::vector<int>& alphabet, int pitch) {
  const auto it = std::lower_bound(alphabet.begin(), alphabet.end(), pitch);
  if (it == alphabet.end() || *it != pitch) return -1;
  return static_cast<int>(it - alphabet.begin());
}

void check_prime(const NextEventModel& model, const std::vector<int>& prime) {
  for (int p : prime) {
    if (alphabet_index(model.alphabet(), p) < 0) {
      throw std::invalid_argument("prime pitch " + std::to_string(p) + " is outside the model alphabet");
    }
  }
}

// Uniform in [0, 1) from the top 53 bits.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

GenerationResult single_walk(const NextEventModel& model, const GenerationConfig& cfg, std::uint64_t restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(restart)};
  std::mt19937_64 rng(seq);
  GenerationResult r;
  r.sequence = cfg.prime;
  double bits = 0.0;
  for (std::size_t step = 0; step < cfg.length; ++step) {
    const PredictiveDistribution p = model.next(r.sequence);
    const auto allowed = admissible(p, cfg.threshold);
    double mass = 0.0;
    for (std::size_t y : allowed) mass += p[y];
    double u = unit(rng) * mass;
    std::size_t chosen = allowed.back();
    for (std::size_t y : allowed) {
      if (u < p[y]) {
        chosen = y;
        break;
      }
      u -= p[y];
    }
    r.sequence.push_back(model.alphabet()[chosen]);
    r.chosen_p.push_back(p[chosen]);
    r.max_p.push_back(p[p.argmax()]);
    bits += p.bits(chosen);
  }
  r.mean_bits = cfg.length ? bits / static_cast<double>(cfg.length) : 0.0;
  return r;
}

}  // namespace

EvalReport cross_entropy(const Corpus& test, const std::vector<int>& alphabet,
                         const std::vector<std::vector<PredictiveDistribution>>& dists) {
  if (dists.size() != test.size()) throw std::invalid_argument("cross_entropy: sequence count mismatch");
  EvalReport r;
  double total_bits = 0.0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < test.size(); ++s) {
    const auto& seq = test.sequences()[s];
    if (dists[s].size() != seq.size()) throw std::invalid_argument("cross_entropy: event count mismatch in " + seq.id);
    double seq_bits = 0.0;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto& p = dists[s][t];
      if (p.size() != alphabet.size()) throw std::invalid_argument("cross_entropy: distribution size mismatch");
      const int y = alphabet_index(alphabet, seq.events[t].pitch);
      const double bits = y < 0 || p[static_cast<std::size_t>(y)] <= 0.0 ? std::numeric_limits<double>::infinity()
                                                                          : p.bits(static_cast<std::size_t>(y));
      if (std::isinf(bits)) r.zero_positions.push_back(ZeroPosition{s, t});
      seq_bits += bits;
      correct += y >= 0 && p.argmax() == static_cast<std::size_t>(y);
    }
    r.ids.push_back(seq.id);
    r.sequence_bits.push_back(seq.size() ? seq_bits / static_cast<double>(seq.size()) : 0.0);
    total_bits += seq_bits;
    r.events += seq.size();
  }
  r.mean_bits = r.events ? total_bits / static_cast<double>(r.events) : 0.0;
  r.accuracy = r.events ? static_cast<double>(correct) / static_cast<double>(r.events) : 0.0;
  return r;
}

std::vector<double> entropy_profile(const EventSequence& seq, const std::vector<int>& alphabet,
                                    std::span<const PredictiveDistribution> dists) {
  if (dists.size() != seq.size()) throw std::invalid_argument("entropy_profile: event count mismatch");
  std::vector<double> out(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const int y = alphabet_index(alphabet, seq.events[t].pitch);
    out[t] = y < 0 ? std::numeric_limits<double>::infinity() : dists[t].bits(static_cast<std::size_t>(y));
  }
  return out;
}

LtmNextEventModel::LtmNextEventModel(const TrainedModel& model, std::span<const int> prime) : model_(model) {
  if (model.spec.needs_key() && !prime.empty()) {
    key_ = find_key(make_sequence("prime", std::vector<int>(prime.begin(), prime.end())), model.profiles,
                    model.duration_weighted_key);
  }
}

PredictiveDistribution LtmNextEventModel::next(std::span<const int> prefix) const {
  return predict_next(model_, prefix, key_);
}

std::string_view to_string(GenerationMethod m) { return m == GenerationMethod::Beam ? "beam" : "iterative_random_walk"; }

GenerationMethod parse_generation_method(std::string_view text) {
  if (text == "beam") return GenerationMethod::Beam;
  if (text == "iterative_random_walk" || text == "walk") return GenerationMethod::IterativeRandomWalk;
  throw std::invalid_argument("unknown generation method '" + std::string(text) + "'");
}

void GenerationConfig::validate() const {
  if (beams < 1) throw std::invalid_argument("beams must be >= 1");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must be in (0, 1]");
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
}

std::vector<std::size_t> admissible(const PredictiveDistribution& p, double threshold) {
  const double cut = threshold * p[p.argmax()];
  std::vector<std::size_t> out;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] >= cut) out.push_back(y);
  }
  return out;
}

GenerationResult beam_search(const NextEventModel& model, const GenerationConfig& cfg) {
  cfg.validate();
  check_prime(model, cfg.prime);
  struct Beam {
    std::vector<int> seq;
    double log_p = 0.0;
    std::vector<double> chosen_p;
    std::vector<double> max_p;
  };
  const auto better = [](const Beam& a, const Beam& b) {
    if (a.log_p != b.log_p) return a.log_p > b.log_p;
    return a.seq < b.seq;
  };
  std::vector<Beam> beams{Beam{cfg.prime, 0.0, {}, {}}};
  for (std::size_t step = 0; step < cfg.length; ++step) {
    std::vector<Beam> pool;
    for (const Beam& b : beams) {
      const PredictiveDistribution p = model.next(b.seq);
      std::vector<std::size_t> order(p.size());
      for (std::size_t y = 0; y < order.size(); ++y) order[y] = y;
      const std::size_t top = std::min(cfg.beams, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                        [&](std::size_t a, std::size_t c) { return p[a] != p[c] ? p[a] > p[c] : a < c; });
      const double max_p = p[p.argmax()];
      for (std::size_t i = 0; i < top; ++i) {
        const std::size_t y = order[i];
        if (p[y] <= 0.0) continue;
        Beam ext = b;
        ext.seq.push_back(model.alphabet()[y]);
        ext.log_p += std::log(p[y]);
        ext.chosen_p.push_back(p[y]);
        ext.max_p.push_back(max_p);
        pool.push_back(std::move(ext));
      }
    }
    if (pool.empty()) throw std::runtime_error("beam search: every continuation has probability 0");
    const std::size_t keep = std::min(cfg.beams, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), better);
    pool.resize(keep);
    beams = std::move(pool);
  }
  const Beam& best = beams.front();
  GenerationResult r;
  r.sequence = best.seq;
  r.chosen_p = best.chosen_p;
  r.max_p = best.max_p;
  r.mean_bits = cfg.length ? -best.log_p / (std::log(2.0) * static_cast<double>(cfg.length)) : 0.0;
  return r;
}

GenerationResult iterative_random_walk(const NextEventModel& model, const GenerationConfig& cfg) {
  cfg.validate();
  check_prime(model, cfg.prime);
  std::vector<GenerationResult> walks(cfg.restarts);
  parallel_for(cfg.restarts, cfg.threads, [&](std::size_t i) { walks[i] = single_walk(model, cfg, i); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < walks.size(); ++i) {
    if (walks[i].mean_bits < walks[best].mean_bits) best = i;
  }
  return walks[best];
}

GenerationResult generate(const NextEventModel& model, const GenerationConfig& cfg) {
  return cfg.method == GenerationMethod::Beam ? beam_search(model, cfg) : iterative_random_walk(model, cfg);
}

}  // namespace pulse
