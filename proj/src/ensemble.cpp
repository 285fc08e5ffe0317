#include "pulse/ensemble.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pulse/error.hpp"
#include "pulse/kernels.hpp"
#include "pulse/model_io.hpp"

namespace pulse {

NGramModel::NGramModel(std::vector<int> alphabet, std::size_t max_order)
    : alphabet_(std::move(alphabet)), max_order_(max_order), unigram_(alphabet_.size(), 0.0) {
  if (alphabet_.empty()) throw std::invalid_argument("n-gram model needs a non-empty alphabet");
}

std::size_t NGramModel::order_limit() const { return max_order_ == 0 ? std::max<std::size_t>(longest_, 1) : max_order_; }

void NGramModel::observe_at(std::span<const int> pitches, std::size_t t) {
  const auto it = std::lower_bound(alphabet_.begin(), alphabet_.end(), pitches[t]);
  if (it == alphabet_.end() || *it != pitches[t]) throw std::invalid_argument("n-gram: pitch outside the alphabet");
  const auto y = static_cast<std::size_t>(it - alphabet_.begin());
  longest_ = std::max(longest_, t + 1);
  unigram_[y] += 1.0;
  total_ += 1.0;
  const std::size_t limit = max_order_ == 0 ? t : std::min(t, max_order_ - 1);
  for (std::size_t k = 1; k <= limit; ++k) {
    std::vector<int> ctx(pitches.begin() + static_cast<std::ptrdiff_t>(t - k), pitches.begin() + static_cast<std::ptrdiff_t>(t));
    auto& row = tables_[std::move(ctx)];
    if (row.empty()) row.assign(alphabet_.size(), 0.0);
    row[y] += 1.0;
  }
}

void NGramModel::observe(std::span<const int> pitches) {
  for (std::size_t t = 0; t < pitches.size(); ++t) observe_at(pitches, t);
}

void NGramModel::observe(const Corpus& corpus) {
  for (const auto& seq : corpus.sequences()) observe(seq.pitches());
}

const std::vector<double>* NGramModel::counts(std::span<const int> context) const {
  const auto it = tables_.find(std::vector<int>(context.begin(), context.end()));
  return it == tables_.end() ? nullptr : &it->second;
}

PredictiveDistribution NGramModel::predict(std::span<const int> context) const {
  const std::size_t n = alphabet_.size();
  std::vector<double> out(n);
  for (std::size_t y = 0; y < n; ++y) out[y] = (unigram_[y] + 1.0) / (total_ + static_cast<double>(n));
  double weight_sum = 1.0;
  const std::size_t limit = std::min(context.size(), order_limit() - 1);
  for (std::size_t k = 1; k <= limit; ++k) {
    const auto* row = counts(context.subspan(context.size() - k));
    if (row == nullptr) continue;
    const double total = kernels::sum(*row);
    const double w = static_cast<double>(k + 1);
    kernels::axpy(w / total, *row, out);
    weight_sum += w;
  }
  kernels::scale(out, 1.0 / weight_sum);
  return PredictiveDistribution(std::move(out));
}

std::vector<PredictiveDistribution> ngram_stm_predict(const EventSequence& seq, const std::vector<int>& alphabet,
                                                      std::size_t max_order) {
  NGramModel model(alphabet, max_order);
  const auto pitches = seq.pitches();
  std::vector<PredictiveDistribution> out;
  out.reserve(pitches.size());
  for (std::size_t t = 0; t < pitches.size(); ++t) {
    out.push_back(t == 0 ? PredictiveDistribution::uniform(alphabet.size())
                         : model.predict(std::span<const int>(pitches).first(t)));
    model.observe_at(pitches, t);
  }
  return out;
}

std::string_view to_string(CombinationRule r) { return r == CombinationRule::Sum ? "sum" : "product"; }

CombinationRule parse_combination_rule(std::string_view text) {
  if (text == "sum") return CombinationRule::Sum;
  if (text == "product") return CombinationRule::Product;
  throw std::invalid_argument("unknown combination rule '" + std::string(text) + "'");
}

double combination_weight(const PredictiveDistribution& p, double bias) {
  if (bias == 0.0) return 1.0;
  double neg_log_sum = 0.0;
  for (double v : p.probs()) {
    if (v <= 0.0) return 0.0;
    neg_log_sum -= std::log(v);
  }
  const double bracket = neg_log_sum / std::log(static_cast<double>(p.size()));
  return std::pow(bracket, -bias);
}

PredictiveDistribution combine(std::span<const PredictiveDistribution> dists, const CombinationConfig& cfg) {
  if (dists.empty()) throw std::invalid_argument("combine: no distributions");
  if (cfg.bias < 0.0) throw std::invalid_argument("combine: bias must be >= 0");
  const std::size_t n = dists.front().size();
  for (const auto& d : dists) {
    if (d.size() != n) throw std::invalid_argument("combine: distributions over different alphabets");
  }
  std::vector<double> w(dists.size());
  for (std::size_t m = 0; m < dists.size(); ++m) w[m] = combination_weight(dists[m], cfg.bias);
  double w_sum = kernels::sum(w);
  if (!(w_sum > 0.0) || !std::isfinite(w_sum)) {
    std::fill(w.begin(), w.end(), 1.0);
    w_sum = static_cast<double>(w.size());
  }

  std::vector<double> out(n, 0.0);
  if (cfg.rule == CombinationRule::Sum) {
    for (std::size_t m = 0; m < dists.size(); ++m) kernels::axpy(w[m] / w_sum, dists[m].probs(), out);
    return PredictiveDistribution::normalize(std::move(out));
  }

  // Geometric mean in the log domain, then max-shifted normalization.
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  bool any_finite = false;
  for (std::size_t y = 0; y < n; ++y) {
    double s = 0.0;
    for (std::size_t m = 0; m < dists.size(); ++m) {
      if (w[m] == 0.0) continue;
      const double p = dists[m][y];
      s = p > 0.0 ? s + (w[m] / w_sum) * std::log(p) : kNegInf;
      if (s == kNegInf) break;
    }
    out[y] = s;
    any_finite = any_finite || s != kNegInf;
  }
  if (!any_finite) {
    // The sources have disjoint supports; fall back to the arithmetic mean.
    CombinationConfig sum_cfg = cfg;
    sum_cfg.rule = CombinationRule::Sum;
    return combine(dists, sum_cfg);
  }
  kernels::softmax_inplace(out);
  return PredictiveDistribution(std::move(out));
}

double combined_bits(const std::vector<std::vector<PredictiveDistribution>>& sources, std::span<const int> truth,
                     const CombinationConfig& cfg) {
  if (sources.empty()) throw std::invalid_argument("combined_bits: no sources");
  for (const auto& s : sources) {
    if (s.size() != truth.size()) throw std::invalid_argument("combined_bits: source length mismatch");
  }
  if (truth.empty()) return 0.0;
  std::vector<PredictiveDistribution> at(sources.size());
  double bits = 0.0;
  for (std::size_t e = 0; e < truth.size(); ++e) {
    for (std::size_t m = 0; m < sources.size(); ++m) at[m] = sources[m][e];
    bits += combine(at, cfg).bits(static_cast<std::size_t>(truth[e]));
  }
  return bits / static_cast<double>(truth.size());
}

double select_bias(const std::vector<std::vector<PredictiveDistribution>>& sources, std::span<const int> truth,
                   CombinationRule rule, std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("select_bias: empty grid");
  double best_bias = grid.front();
  double best_bits = std::numeric_limits<double>::infinity();
  for (double b : grid) {
    const double bits = combined_bits(sources, truth, CombinationConfig{rule, b});
    if (bits < best_bits) {
      best_bits = bits;
      best_bias = b;
    }
  }
  return best_bias;
}

void write_distributions(std::ostream& out, const Corpus& corpus, const std::vector<int>& alphabet,
                         const std::vector<std::vector<PredictiveDistribution>>& dists) {
  if (dists.size() != corpus.size()) throw std::invalid_argument("write_distributions: sequence count mismatch");
  out << "sequence_id,t";
  for (int p : alphabet) out << ",p_" << p;
  out << '\n';
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& seq = corpus.sequences()[s];
    if (dists[s].size() != seq.size()) throw std::invalid_argument("write_distributions: event count mismatch");
    for (std::size_t t = 0; t < seq.size(); ++t) {
      out << seq.id << ',' << t;
      for (double p : dists[s][t].probs()) out << ',' << format_double(p);
      out << '\n';
    }
  }
}

std::vector<std::vector<PredictiveDistribution>> read_distributions(std::istream& in, const Corpus& corpus,
                                                                    const std::vector<int>& alphabet,
                                                                    const std::string& source) {
  const auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::map<std::string, std::size_t> index;
  for (std::size_t s = 0; s < corpus.size(); ++s) index[corpus.sequences()[s].id] = s;
  std::vector<std::vector<PredictiveDistribution>> out(corpus.size());
  const std::size_t columns = 2 + alphabet.size();

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(source, 0, "empty distribution file");
  ++line_no;
  if (split(line).size() != columns) {
    throw ValidationError(source + ": header has " + std::to_string(split(line).size()) + " columns, expected " +
                          std::to_string(columns));
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != columns) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + std::to_string(cells.size()) +
                            " columns, expected " + std::to_string(columns));
    }
    const auto it = index.find(cells[0]);
    if (it == index.end()) throw ValidationError(source + ":" + std::to_string(line_no) + ": unknown sequence " + cells[0]);
    auto& rows = out[it->second];
    std::size_t t = 0;
    const auto [ptr, ec] = std::from_chars(cells[1].data(), cells[1].data() + cells[1].size(), t);
    if (ec != std::errc{} || ptr != cells[1].data() + cells[1].size()) throw ParseError(source, line_no, "bad event index");
    if (t != rows.size()) throw ValidationError(source + ":" + std::to_string(line_no) + ": events out of order");
    std::vector<double> p(alphabet.size());
    for (std::size_t y = 0; y < alphabet.size(); ++y) {
      const auto& c = cells[2 + y];
      const auto [pp, pec] = std::from_chars(c.data(), c.data() + c.size(), p[y]);
      if (pec != std::errc{} || pp != c.data() + c.size() || !(p[y] >= 0.0) || !std::isfinite(p[y])) {
        throw ParseError(source, line_no, "bad probability '" + c + "'");
      }
    }
    const double total = kernels::sum(p);
    if (std::abs(total - 1.0) > 1e-6) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": probabilities sum to " + format_double(total));
    }
    rows.push_back(PredictiveDistribution::normalize(std::move(p)));
  }
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    if (out[s].size() != corpus.sequences()[s].size()) {
      throw ValidationError(source + ": sequence " + corpus.sequences()[s].id + " has " + std::to_string(out[s].size()) +
                            " rows, expected " + std::to_string(corpus.sequences()[s].size()));
    }
  }
  return out;
}

std::vector<std::vector<PredictiveDistribution>> load_distributions(const std::filesystem::path& path,
                                                                    const Corpus& corpus,
                                                                    const std::vector<int>& alphabet) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open distribution file " + path.string());
  return read_distributions(in, corpus, alphabet, path.string());
}

}  // namespace pulse
