#include "pulse/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pulse/parallel.hpp"

namespace pulse {
namespace {

struct GrowResult {
  std::size_t added = 0;
};

// Adds the candidates that fire somewhere in `data` with weight 0 and
// extends the matrix by their columns.
GrowResult grow(FeatureSet& fs, FeatureMatrix& m, const Dataset& ds, std::span<const Datum> data,
                std::vector<CompoundFeature> candidates, std::size_t threads) {
  std::vector<CompoundFeature> fresh;
  fresh.reserve(candidates.size());
  for (auto& c : candidates) {
    if (!fs.contains(c)) fresh.push_back(std::move(c));
  }
  GrowResult r;
  if (fresh.empty()) return r;
  const FeatureMatrix mc = build_matrix(ds, data, fresh, threads);
  const auto counts = mc.column_counts();
  std::vector<std::int64_t> new_index(fresh.size(), -1);
  std::size_t next = 0;
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    if (counts[i] == 0) continue;
    if (!fs.add(fresh[i], 0.0)) continue;
    new_index[i] = static_cast<std::int64_t>(next++);
  }
  r.added = next;
  if (next > 0) m = m.append_columns(mc.select_columns(new_index, next));
  return r;
}

std::vector<std::int64_t> identity_map(std::size_t n) {
  std::vector<std::int64_t> map(n);
  std::iota(map.begin(), map.end(), std::int64_t{0});
  return map;
}

// Drops zero-weight features from the set, matrix and optimizer state.
void shrink(FeatureSet& fs, FeatureMatrix& m, OptimizerState& state, const OptimizerConfig& opt) {
  std::vector<bool> keep(fs.size());
  std::vector<std::int64_t> map(fs.size(), -1);
  std::size_t next = 0;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    keep[i] = fs.weights()[i] != 0.0;
    if (keep[i]) map[i] = static_cast<std::int64_t>(next++);
  }
  if (next == fs.size()) return;
  fs = fs.select(keep);
  m = m.select_columns(map, next);
  state = hot_start(state, map, next, opt);
}

void set_factors(OptimizerConfig& opt, const FeatureSet& fs, const RegularizationSpec& reg) {
  opt.l1_factors.resize(fs.size());
  opt.l2_factors.resize(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    opt.l1_factors[i] = per_feature_factor(fs.feature(i), reg.l1_kind, reg.l1_alpha);
    opt.l2_factors[i] = per_feature_factor(fs.feature(i), reg.l2_kind, reg.l2_alpha);
  }
}

double dataset_bits(const FeatureSet& fs, const Dataset& ds, std::size_t threads) {
  const FeatureMatrix m = build_matrix(ds, fs.features(), threads);
  return objective(m, fs.weights(), threads).mean() / std::log(2.0);
}

}  // namespace

std::string_view to_string(RegKind k) {
  switch (k) {
    case RegKind::Constant: return "constant";
    case RegKind::Linear: return "linear";
    case RegKind::LinearNoZero: return "linear_no_zero";
    case RegKind::Polynomial: return "polynomial";
    case RegKind::Exponential: return "exponential";
    case RegKind::ExponentialWithZero: return "exponential_with_zero";
  }
  return "?";
}

RegKind parse_reg_kind(std::string_view text) {
  for (RegKind k : {RegKind::Constant, RegKind::Linear, RegKind::LinearNoZero, RegKind::Polynomial,
                    RegKind::Exponential, RegKind::ExponentialWithZero}) {
    if (to_string(k) == text) return k;
  }
  throw std::invalid_argument("unknown regularization kind '" + std::string(text) + "'");
}

double regularization_factor(RegKind kind, double alpha, int delta) {
  const double d = delta;
  switch (kind) {
    case RegKind::Constant: return 1.0;
    case RegKind::Linear: return alpha * d;
    case RegKind::LinearNoZero: return alpha * d + 1.0;
    case RegKind::Polynomial: return std::pow(d, alpha);
    case RegKind::Exponential: return std::pow(alpha, d);
    case RegKind::ExponentialWithZero: return delta > 0 ? std::pow(alpha, d) : 0.0;
  }
  return 1.0;
}

double per_feature_factor(const CompoundFeature& f, RegKind kind, double alpha) {
  return regularization_factor(kind, alpha, f.max_sigma());
}

double decayed_lambda(double lambda_init, double t, double tau) { return lambda_init * std::exp(-t / tau); }

void RegularizationSpec::validate() const {
  if (!(l1_alpha > 0.0) || !(l2_alpha > 0.0)) throw std::invalid_argument("regularization alpha must be > 0");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw std::invalid_argument("lambda1/lambda2 must be >= 0");
  if (decay && (!(tau1 > 0.0) || !(tau2 > 0.0))) throw std::invalid_argument("decay taus must be > 0");
}

std::string_view to_string(OuterCriterion c) {
  switch (c) {
    case OuterCriterion::Fluctuation: return "fluctuation";
    case OuterCriterion::SetSize: return "set_size";
    case OuterCriterion::ValidationEma: return "validation_ema";
  }
  return "?";
}

OuterCriterion parse_outer_criterion(std::string_view text) {
  for (OuterCriterion c : {OuterCriterion::Fluctuation, OuterCriterion::SetSize, OuterCriterion::ValidationEma}) {
    if (to_string(c) == text) return c;
  }
  throw std::invalid_argument("unknown outer criterion '" + std::string(text) + "'");
}

void OuterConvergence::validate() const {
  if (!(gamma > 0.0)) throw std::invalid_argument("outer gamma must be > 0");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("outer tau must be in (0, 1)");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must be in (0, 1)");
  }
}

std::string_view to_string(OuterStop s) {
  switch (s) {
    case OuterStop::Converged: return "converged";
    case OuterStop::IterationCap: return "iteration_cap";
    case OuterStop::FeatureCap: return "feature_cap";
  }
  return "?";
}

std::size_t symmetric_difference(const FeatureSet& a, const FeatureSet& b) {
  std::size_t n = 0;
  for (const auto& f : a.features()) n += !b.contains(f);
  for (const auto& f : b.features()) n += !a.contains(f);
  return n;
}

bool fluctuation_converged(const FeatureSet& current, const FeatureSet& previous, double gamma) {
  if (current.empty() && previous.empty()) return true;
  return static_cast<double>(symmetric_difference(current, previous)) < gamma * static_cast<double>(current.size());
}

bool set_size_converged(std::size_t current, std::size_t previous, double gamma) {
  if (current == 0 && previous == 0) return true;
  const double diff = std::abs(static_cast<double>(current) - static_cast<double>(previous));
  return diff < gamma * static_cast<double>(current);
}

std::string corpus_hash(const Corpus& corpus) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& seq : corpus.sequences()) {
    for (unsigned char c : serialize_sequence(seq) + "\n") {
      h ^= c;
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LtmResult fit_ltm(const Corpus& corpus, const LtmConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("fit_ltm: empty training corpus");
  cfg.reg.validate();
  cfg.opt.validate();
  cfg.conv.validate();
  cfg.outer.validate();

  Corpus train = corpus;
  std::optional<Corpus> validation;
  if (cfg.outer.criterion == OuterCriterion::ValidationEma) {
    if (corpus.size() < 2) throw std::invalid_argument("validation criterion needs at least two sequences");
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.opt.seed);
    std::shuffle(order.begin(), order.end(), rng);
    auto held = static_cast<std::size_t>(std::ceil(cfg.outer.validation_fraction * static_cast<double>(corpus.size())));
    held = std::clamp<std::size_t>(held, 1, corpus.size() - 1);
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    train = corpus.subset(train_idx);
    validation = corpus.subset(val_idx);
  }

  const bool keyed = cfg.spec.needs_key();
  const KeyProfiles* profiles = keyed ? &cfg.profiles : nullptr;
  const Dataset ds = Dataset::from_corpus(train, profiles, cfg.duration_weighted_key);
  std::optional<Dataset> vds;
  if (validation) vds = Dataset::from_corpus(*validation, profiles, cfg.duration_weighted_key);
  const ValueSets values = occurring_values(ds);

  OptimizerConfig opt = cfg.opt;
  opt.n = ds.data.size();
  opt.lambda1 = cfg.reg.lambda1;
  opt.lambda2 = cfg.reg.lambda2;

  LtmResult result;
  FeatureSet fs;
  FeatureSet previous;
  FeatureMatrix m = build_matrix(ds, std::span<const CompoundFeature>{}, cfg.threads);
  OptimizerState state = OptimizerState::fresh(0, opt);
  Ema validation_ema(cfg.outer.tau);
  int expansion_iteration = 0;
  result.stop = OuterStop::IterationCap;

  for (std::size_t j = 1; j <= cfg.outer.max_iterations; ++j) {
    IterationLog entry;
    entry.iteration = j;
    auto candidates = j == 1 ? init_features(cfg.spec, values)
                             : expand(cfg.expansion, fs, cfg.spec, values, expansion_iteration++);
    const std::size_t before = fs.size();
    entry.candidates = grow(fs, m, ds, ds.data, std::move(candidates), cfg.threads).added;
    state = hot_start(state, identity_map(before), fs.size(), opt);
    set_factors(opt, fs, cfg.reg);

    const RunResult run_result = run(m, state, opt, cfg.conv);
    fs.weights() = state.weights;
    entry.epochs = run_result.epochs;
    entry.inner = run_result.reason;
    entry.objective = run_result.mean_loss;
    if (cfg.shrink) shrink(fs, m, state, opt);
    entry.features = fs.size();
    entry.changed = symmetric_difference(fs, previous);

    bool converged = false;
    switch (cfg.outer.criterion) {
      case OuterCriterion::Fluctuation: converged = fluctuation_converged(fs, previous, cfg.outer.gamma); break;
      case OuterCriterion::SetSize: converged = set_size_converged(fs.size(), previous.size(), cfg.outer.gamma); break;
      case OuterCriterion::ValidationEma: {
        entry.validation_bits = dataset_bits(fs, *vds, cfg.threads);
        const bool had = !validation_ema.empty();
        const double prev = validation_ema.value();
        const double now = validation_ema.push(entry.validation_bits);
        converged = had && std::abs(now - prev) < cfg.outer.gamma;
        break;
      }
    }
    result.log.push_back(entry);
    previous = fs;
    if (cfg.feature_cap > 0 && fs.size() > cfg.feature_cap) {
      result.stop = OuterStop::FeatureCap;
      break;
    }
    if (converged) {
      result.stop = OuterStop::Converged;
      break;
    }
  }

  if (result.stop == OuterStop::Converged && !fs.empty()) {
    // Final polish of the converged set on the loss criterion alone.
    set_factors(opt, fs, cfg.reg);
    ConvergenceConfig polish = cfg.conv;
    polish.mode = ConvergenceMode::LossOnly;
    run(m, state, opt, polish);
    fs.weights() = state.weights;
    if (cfg.shrink) shrink(fs, m, state, opt);
  }

  TrainedModel& model = result.model;
  model.features = std::move(fs);
  model.alphabet = corpus.alphabet();
  model.spec = cfg.spec;
  model.expansion = cfg.expansion;
  model.reg = cfg.reg;
  model.profiles = cfg.profiles;
  model.duration_weighted_key = cfg.duration_weighted_key;
  model.converged = result.stop == OuterStop::Converged;
  model.corpus_hash = corpus_hash(corpus);
  model.seed = cfg.opt.seed;
  model.epochs = state.epochs;
  model.iterations = result.log.size();
  return result;
}

std::vector<PredictiveDistribution> fit_predict_stm(const EventSequence& seq, const std::vector<int>& alphabet,
                                                    const StmConfig& cfg) {
  if (cfg.spec.needs_key()) throw std::invalid_argument("short-term specs cannot use key-dependent viewpoints");
  cfg.reg.validate();
  cfg.opt.validate();
  cfg.conv.validate();
  validate(seq);

  Dataset ds;
  ds.alphabet = alphabet;
  ds.contexts.emplace_back(seq, std::nullopt);
  const SequenceContext& ctx = ds.contexts.front();
  const std::vector<Viewpoint> declared = cfg.spec.viewpoints();

  FeatureSet fs;
  FeatureMatrix m(0, alphabet.size());
  OptimizerConfig opt = cfg.opt;
  OptimizerState state = OptimizerState::fresh(0, opt);
  ValueSets values;
  int expansion_iteration = 0;

  std::vector<PredictiveDistribution> out;
  out.reserve(seq.size());
  for (std::uint32_t t = 0; t < seq.size(); ++t) {
    const Datum datum{0, t};
    const FeatureMatrix row = build_matrix(ds, std::span<const Datum>(&datum, 1), fs.features());
    out.push_back(fs.empty() ? PredictiveDistribution::uniform(alphabet.size()) : predict(row, fs.weights(), 0));
    if (row.truth(0) < 0) throw std::invalid_argument("pitch outside the alphabet in sequence " + seq.id);

    ds.data.push_back(datum);
    m.append_rows(row);
    add_values(values, ds, datum);

    std::vector<CompoundFeature> candidates;
    for (Viewpoint vp : declared) {
      if (const auto& v = ctx.stream(vp, t)) candidates.push_back(CompoundFeature{BasisFeature{vp, 0, *v}});
    }
    const ExpansionAnchor anchor{&ctx, t};
    for (auto& c : expand(cfg.expansion, fs, cfg.spec, values, expansion_iteration++, &anchor)) {
      candidates.push_back(std::move(c));
    }
    const std::size_t before = fs.size();
    grow(fs, m, ds, ds.data, std::move(candidates), 1);
    state = hot_start(state, identity_map(before), fs.size(), opt);
    if (fs.empty()) continue;

    opt.n = ds.data.size();
    opt.lambda1 = cfg.reg.decay ? decayed_lambda(cfg.reg.lambda1, t, cfg.reg.tau1) : cfg.reg.lambda1;
    opt.lambda2 = cfg.reg.decay ? decayed_lambda(cfg.reg.lambda2, t, cfg.reg.tau2) : cfg.reg.lambda2;
    set_factors(opt, fs, cfg.reg);
    run(m, state, opt, cfg.conv);
    fs.weights() = state.weights;
    if (cfg.shrink) shrink(fs, m, state, opt);
  }
  return out;
}

Dataset make_dataset(const TrainedModel& model, const Corpus& corpus) {
  bool keyed = false;
  for (const auto& f : model.features.features()) {
    for (const auto& b : f.basis()) keyed = keyed || needs_key(b.viewpoint);
  }
  Dataset ds = Dataset::from_corpus(corpus, keyed ? &model.profiles : nullptr, model.duration_weighted_key);
  ds.alphabet = model.alphabet;
  return ds;
}

std::vector<std::vector<PredictiveDistribution>> predict_corpus(const TrainedModel& model, const Corpus& corpus,
                                                                std::size_t threads) {
  const Dataset ds = make_dataset(model, corpus);
  const FeatureMatrix m = build_matrix(ds, model.features.features(), threads);
  std::vector<std::vector<PredictiveDistribution>> out(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s) out[s].resize(corpus.sequences()[s].size());
  parallel_for(ds.data.size(), threads, [&](std::size_t d) {
    out[ds.data[d].sequence][ds.data[d].t] = predict(m, model.features.weights(), d);
  });
  return out;
}

PredictiveDistribution predict_next(const TrainedModel& model, std::span<const int> prefix,
                                    const std::optional<KeyEstimate>& key) {
  std::vector<int> pitches(prefix.begin(), prefix.end());
  pitches.push_back(model.alphabet.front());
  const EventSequence seq = make_sequence("next", pitches);
  bool keyed = false;
  for (const auto& f : model.features.features()) {
    for (const auto& b : f.basis()) keyed = keyed || needs_key(b.viewpoint);
  }
  std::optional<KeyEstimate> k = key;
  if (!k && keyed && !prefix.empty()) {
    EventSequence prime = make_sequence("prime", std::vector<int>(prefix.begin(), prefix.end()));
    k = find_key(prime, model.profiles, model.duration_weighted_key);
  }
  Dataset ds;
  ds.alphabet = model.alphabet;
  ds.contexts.emplace_back(seq, k);
  const Datum datum{0, static_cast<std::uint32_t>(prefix.size())};
  const FeatureMatrix m = build_matrix(ds, std::span<const Datum>(&datum, 1), model.features.features());
  return predict(m, model.features.weights(), 0);
}

}  // namespace pulse
