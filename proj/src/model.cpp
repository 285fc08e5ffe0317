#include "pulse/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pulse/kernels.hpp"
#include "pulse/parallel.hpp"

namespace pulse {

PredictiveDistribution::PredictiveDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  log2_.resize(probs_.size());
  for (std::size_t y = 0; y < probs_.size(); ++y) log2_[y] = std::log2(probs_[y]);
}

PredictiveDistribution PredictiveDistribution::uniform(std::size_t n) {
  return PredictiveDistribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

PredictiveDistribution PredictiveDistribution::normalize(std::vector<double> weights) {
  const double total = kernels::sum(weights);
  if (!(total > 0.0) || !std::isfinite(total)) throw std::invalid_argument("cannot normalize: total weight is not positive");
  kernels::scale(weights, 1.0 / total);
  return PredictiveDistribution(std::move(weights));
}

double PredictiveDistribution::entropy() const {
  double h = 0.0;
  for (std::size_t y = 0; y < probs_.size(); ++y) {
    if (probs_[y] > 0.0) h -= probs_[y] * log2_[y];
  }
  return h;
}

std::size_t PredictiveDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

void scores(const FeatureMatrix& m, std::span<const double> theta, std::size_t d, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& e : m.row(d)) out[e.outcome] += theta[e.feature];
}

PredictiveDistribution predict(const FeatureMatrix& m, std::span<const double> theta, std::size_t d) {
  std::vector<double> p(m.outcomes());
  scores(m, theta, d, p);
  kernels::softmax_inplace(p);
  return PredictiveDistribution(std::move(p));
}

ObjectiveValue objective(const FeatureMatrix& m, std::span<const double> theta, std::size_t threads) {
  std::vector<double> per_datum(m.data());
  parallel_for(m.data(), threads, [&](std::size_t d) {
    std::vector<double> s(m.outcomes());
    scores(m, theta, d, s);
    const double log_z = kernels::softmax_inplace(s);
    // -log p(truth) = log Z - s[truth]; recompute the score to avoid log(0).
    double truth_score = 0.0;
    for (const auto& e : m.row(d)) {
      if (e.outcome == static_cast<std::uint32_t>(m.truth(d))) truth_score += theta[e.feature];
    }
    per_datum[d] = log_z - truth_score;
  });
  ObjectiveValue v;
  v.data = m.data();
  for (double x : per_datum) v.nll += x;
  return v;
}

void GradientWorkspace::reset(std::size_t features, std::size_t outcomes) {
  dense_.assign(features, 0.0);
  touched_.assign(features, 0);
  list_.clear();
  probs_.assign(outcomes, 0.0);
}

SparseGradient gradient(const FeatureMatrix& m, std::span<const double> theta, std::span<const std::size_t> batch,
                        GradientWorkspace& ws) {
  if (batch.empty()) throw std::invalid_argument("gradient: empty batch");
  if (ws.dense_.size() != m.features() || ws.probs_.size() != m.outcomes()) ws.reset(m.features(), m.outcomes());

  SparseGradient g;
  for (std::size_t d : batch) {
    std::span<double> p(ws.probs_);
    scores(m, theta, d, p);
    const auto truth = static_cast<std::uint32_t>(m.truth(d));
    const double log_z = kernels::softmax_inplace(p);
    double truth_score = 0.0;
    for (const auto& e : m.row(d)) {
      if (!ws.touched_[e.feature]) {
        ws.touched_[e.feature] = 1;
        ws.list_.push_back(e.feature);
      }
      ws.dense_[e.feature] += p[e.outcome];
      if (e.outcome == truth) {
        ws.dense_[e.feature] -= 1.0;
        truth_score += theta[e.feature];
      }
    }
    g.nll += log_z - truth_score;
  }

  std::sort(ws.list_.begin(), ws.list_.end());
  g.index = ws.list_;
  g.value.reserve(g.index.size());
  for (std::uint32_t f : g.index) {
    g.value.push_back(ws.dense_[f]);
    ws.dense_[f] = 0.0;
    ws.touched_[f] = 0;
  }
  ws.list_.clear();
  return g;
}

SparseGradient gradient(const FeatureMatrix& m, std::span<const double> theta, std::span<const std::size_t> batch) {
  GradientWorkspace ws;
  return gradient(m, theta, batch, ws);
}

}  // namespace pulse
