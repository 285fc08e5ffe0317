#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pulse/features.hpp"

namespace pulse {

// Probabilities over the alphabet with cached base-2 log-probabilities.
class PredictiveDistribution {
 public:
  PredictiveDistribution() = default;
  // Takes probabilities that already sum to one.
  explicit PredictiveDistribution(std::vector<double> probs);
  static PredictiveDistribution uniform(std::size_t n);
  // Normalizes non-negative weights; throws std::invalid_argument if they sum to 0.
  static PredictiveDistribution normalize(std::vector<double> weights);

  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  double operator[](std::size_t y) const { return probs_[y]; }
  double log2(std::size_t y) const { return log2_[y]; }
  double bits(std::size_t y) const { return -log2_[y]; }
  // Shannon entropy in bits.
  double entropy() const;
  // Index of the largest probability; ties go to the lowest index.
  std::size_t argmax() const;

 private:
  std::vector<double> probs_;
  std::vector<double> log2_;
};

// Unnormalized scores s[y] = sum_f theta_f * m[d][f][y].
void scores(const FeatureMatrix& m, std::span<const double> theta, std::size_t d, std::span<double> out);

PredictiveDistribution predict(const FeatureMatrix& m, std::span<const double> theta, std::size_t d);

struct ObjectiveValue {
  double nll = 0.0;  // natural log, summed over data
  std::size_t data = 0;
  double mean() const { return data ? nll / static_cast<double>(data) : 0.0; }
};

ObjectiveValue objective(const FeatureMatrix& m, std::span<const double> theta, std::size_t threads = 1);

// Gradient restricted to the features that fire on the batch; indices ascending.
struct SparseGradient {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
  double nll = 0.0;  // batch NLL at theta

  std::size_t size() const { return index.size(); }
};

// Reusable dense scratch space for gradient().
class GradientWorkspace {
 public:
  void reset(std::size_t features, std::size_t outcomes);

 private:
  friend SparseGradient gradient(const FeatureMatrix&, std::span<const double>, std::span<const std::size_t>,
                                 GradientWorkspace&);
  std::vector<double> dense_;
  std::vector<std::uint8_t> touched_;
  std::vector<std::uint32_t> list_;
  std::vector<double> probs_;
};

// g_f = sum_{d in batch} E_p[m[d][f][.]] - m[d][f][truth(d)]
SparseGradient gradient(const FeatureMatrix& m, std::span<const double> theta, std::span<const std::size_t> batch,
                        GradientWorkspace& ws);
SparseGradient gradient(const FeatureMatrix& m, std::span<const double> theta, std::span<const std::size_t> batch);

}  // namespace pulse
