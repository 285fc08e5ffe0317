#include "pulse/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "pulse/analysis.hpp"
#include "pulse/cli/grid_search.hpp"
#include "pulse/ensemble.hpp"
#include "pulse/error.hpp"
#include "pulse/evalgen.hpp"
#include "pulse/model_io.hpp"
#include "pulse/parallel.hpp"

namespace pulse::cli {
namespace {

Corpus load_corpus(const std::filesystem::path& path, const std::string& key) {
  if (path.empty()) throw ConfigError(key + " is required for this command");
  if (!std::filesystem::exists(path)) throw ConfigError(key + ": no such file " + path.string());
  return ingest(path);
}

TrainedModel load_model_file(const std::filesystem::path& path) {
  if (path.empty()) throw ConfigError("model is required for this command");
  if (!std::filesystem::exists(path)) throw ConfigError("model: no such file " + path.string());
  return load_model(path);
}

std::ofstream open_report(const RunConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.output);
  const auto path = cfg.output / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

std::size_t workers(const RunConfig& cfg) { return resolve_threads(cfg.threads); }

// Corpus whose alphabet is the union of both inputs' pitches.
std::vector<int> union_alphabet(const Corpus& a, const Corpus* b) {
  std::set<int> pitches(a.alphabet().begin(), a.alphabet().end());
  if (b != nullptr) pitches.insert(b->alphabet().begin(), b->alphabet().end());
  return {pitches.begin(), pitches.end()};
}

Corpus with_alphabet(const Corpus& c, const std::vector<int>& alphabet) {
  for (int p : c.alphabet()) {
    if (!std::binary_search(alphabet.begin(), alphabet.end(), p)) {
      throw ValidationError("pitch " + std::to_string(p) + " is outside the alphabet");
    }
  }
  return Corpus(c.sequences(), alphabet);
}

using Distributions = std::vector<std::vector<PredictiveDistribution>>;

Distributions online_predictions(const RunConfig& cfg, const Corpus& corpus, const std::vector<int>& alphabet,
                                 StmModel kind) {
  Distributions out(corpus.size());
  parallel_for(corpus.size(), workers(cfg), [&](std::size_t s) {
    const auto& seq = corpus.sequences()[s];
    out[s] = kind == StmModel::Pulse ? fit_predict_stm(seq, alphabet, cfg.stm)
                                     : ngram_stm_predict(seq, alphabet, cfg.ngram_order);
  });
  return out;
}

// Seeded split of sequence indices into (train, validation).
std::pair<Corpus, Corpus> holdout(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (corpus.size() < 2) throw ConfigError("validation split needs at least two training sequences");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto held = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(corpus.size())));
  held = std::clamp<std::size_t>(held, 1, corpus.size() - 1);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {corpus.subset(train), corpus.subset(val)};
}

double ltm_bits(const LtmConfig& ltm, const Corpus& train, const Corpus& test) {
  const auto model = fit_ltm(train, ltm).model;
  return cross_entropy(test, model.alphabet, predict_corpus(model, test, ltm.threads)).mean_bits;
}

void write_eval_rows(std::ostream& out, const EvalReport& r, const Corpus& corpus) {
  out << "sequence_id,events,mean_bits,accuracy\n";
  for (std::size_t s = 0; s < r.ids.size(); ++s) {
    out << r.ids[s] << ',' << corpus.sequences()[s].size() << ',' << format_double(r.sequence_bits[s]) << ",\n";
  }
  out << "ALL," << r.events << ',' << format_double(r.mean_bits) << ',' << format_double(r.accuracy) << '\n';
}

void write_profiles(std::ostream& out, const Corpus& corpus, const std::vector<int>& alphabet, const Distributions& d) {
  out << "sequence_id,t,pitch,bits\n";
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    const auto& seq = corpus.sequences()[s];
    const auto bits = entropy_profile(seq, alphabet, d[s]);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      out << seq.id << ',' << t << ',' << seq.events[t].pitch << ',' << format_double(bits[t]) << '\n';
    }
  }
}

std::vector<int> truth_indices(const Corpus& corpus, const std::vector<int>& alphabet) {
  std::vector<int> out;
  for (const auto& seq : corpus.sequences()) {
    for (const auto& e : seq.events) {
      const auto it = std::lower_bound(alphabet.begin(), alphabet.end(), e.pitch);
      out.push_back(static_cast<int>(it - alphabet.begin()));
    }
  }
  return out;
}

std::vector<PredictiveDistribution> flatten(const Distributions& d) {
  std::vector<PredictiveDistribution> out;
  for (const auto& seq : d) out.insert(out.end(), seq.begin(), seq.end());
  return out;
}

}  // namespace

int cmd_ingest_check(const RunConfig& cfg, std::ostream& out) {
  const Corpus train = load_corpus(cfg.train, "corpus.train");
  const auto describe = [&](const char* name, const Corpus& c) {
    out << name << ": " << c.size() << " sequences, " << c.event_count() << " events, alphabet";
    for (int p : c.alphabet()) out << ' ' << p;
    out << '\n';
  };
  describe("train", train);
  if (!cfg.test.empty()) {
    const Corpus test = load_corpus(cfg.test, "corpus.test");
    describe("test", test);
    std::set<std::string> ids;
    for (const auto& s : train.sequences()) ids.insert(s.id);
    for (const auto& s : test.sequences()) {
      if (ids.count(s.id)) throw ValidationError("sequence id " + s.id + " appears in both train and test");
    }
  }
  if (!cfg.folds.empty()) {
    const FoldAssignment folds = load_folds(cfg.folds);
    validate_folds(train, folds);
    out << "folds: " << folds.k << " folds cover all " << train.size() << " sequences\n";
  }
  out << "ok\n";
  return kExitOk;
}

int cmd_train_ltm(const RunConfig& cfg, std::ostream& out) {
  const Corpus corpus = load_corpus(cfg.train, "corpus.train");
  const LtmResult r = fit_ltm(corpus, cfg.ltm);
  {
    auto file = open_report(cfg, "model.txt");
    save_model(file, r.model);
  }
  auto log = open_report(cfg, "train_log.csv");
  log << "iteration,candidates,features,changed,objective,validation_bits,epochs,inner_stop\n";
  for (const auto& e : r.log) {
    log << e.iteration << ',' << e.candidates << ',' << e.features << ',' << e.changed << ','
        << format_double(e.objective) << ',' << (e.validation_bits < 0.0 ? std::string() : format_double(e.validation_bits))
        << ',' << e.epochs << ',' << to_string(e.inner) << '\n';
  }
  out << "features " << r.model.features.size() << "\niterations " << r.log.size() << "\nstop " << to_string(r.stop)
      << '\n';
  if (r.stop != OuterStop::Converged) {
    out << "warning: feature discovery did not converge; model flagged as unconverged\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_stm_eval(const RunConfig& cfg, std::ostream& out) {
  const Corpus corpus = load_corpus(cfg.test.empty() ? cfg.train : cfg.test, cfg.test.empty() ? "corpus.train" : "corpus.test");
  const auto& alphabet = corpus.alphabet();
  const Distributions d = online_predictions(cfg, corpus, alphabet, cfg.stm_model);
  const EvalReport r = cross_entropy(corpus, alphabet, d);
  {
    auto f = open_report(cfg, "stm_eval.csv");
    write_eval_rows(f, r, corpus);
  }
  {
    auto f = open_report(cfg, "stm_profiles.csv");
    write_profiles(f, corpus, alphabet, d);
  }
  {
    auto f = open_report(cfg, "stm_distributions.csv");
    write_distributions(f, corpus, alphabet, d);
  }
  out << "mean_bits " << format_double(r.mean_bits) << "\naccuracy " << format_double(r.accuracy) << '\n';
  return kExitOk;
}

int cmd_cv(const RunConfig& cfg, std::ostream& out) {
  const Corpus corpus = load_corpus(cfg.train, "corpus.train");
  FoldAssignment folds;
  if (!cfg.folds.empty()) {
    folds = load_folds(cfg.folds);
    validate_folds(corpus, folds);
  } else {
    if (cfg.k < 2 || cfg.k > corpus.size()) throw ConfigError("corpus.k must be between 2 and the number of sequences");
    folds = split_folds(corpus, cfg.k, cfg.seed);
  }

  struct FoldResult {
    std::size_t train = 0, test = 0, features = 0;
    double lambda1 = 0.0;
    bool converged = true;
    EvalReport report;
  };
  std::vector<FoldResult> results(folds.k);
  // Folds run in parallel; each fold trains single-threaded.
  parallel_for(folds.k, workers(cfg), [&](std::size_t f) {
    auto [train, test] = train_test_split(corpus, folds, f);
    LtmConfig ltm = cfg.ltm;
    ltm.threads = 1;
    if (!cfg.cv_lambda1_grid.empty()) {
      auto [inner_train, inner_val] = holdout(train, cfg.validation_fraction, cfg.seed + f);
      const GridResult g = grid_search(cfg.cv_lambda1_grid, [&](double lambda) {
        LtmConfig c = ltm;
        c.reg.lambda1 = lambda;
        return ltm_bits(c, inner_train, inner_val);
      }, 1);
      ltm.reg.lambda1 = g.best_value();
    }
    const LtmResult r = fit_ltm(train, ltm);
    FoldResult& fr = results[f];
    fr.train = train.size();
    fr.test = test.size();
    fr.features = r.model.features.size();
    fr.lambda1 = ltm.reg.lambda1;
    fr.converged = r.stop == OuterStop::Converged;
    fr.report = cross_entropy(test, r.model.alphabet, predict_corpus(r.model, test, 1));
  });

  auto csv = open_report(cfg, "cv.csv");
  csv << "fold,train_sequences,test_sequences,lambda1,features,converged,mean_bits,accuracy\n";
  double bits = 0.0, acc = 0.0;
  bool all_converged = true;
  for (std::size_t f = 0; f < results.size(); ++f) {
    const auto& r = results[f];
    csv << f << ',' << r.train << ',' << r.test << ',' << format_double(r.lambda1) << ',' << r.features << ','
        << (r.converged ? 1 : 0) << ',' << format_double(r.report.mean_bits) << ',' << format_double(r.report.accuracy)
        << '\n';
    bits += r.report.mean_bits;
    acc += r.report.accuracy;
    all_converged = all_converged && r.converged;
  }
  const double k = static_cast<double>(results.size());
  csv << "mean,,,,,," << format_double(bits / k) << ',' << format_double(acc / k) << '\n';
  out << "mean_bits " << format_double(bits / k) << "\naccuracy " << format_double(acc / k) << '\n';
  if (!all_converged) {
    out << "warning: at least one fold did not converge\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_hybrid(const RunConfig& cfg, std::ostream& out) {
  const Corpus test_raw = load_corpus(cfg.test, "corpus.test");
  const bool select = !cfg.hybrid_bias.has_value();
  std::optional<Corpus> train_raw;
  if (select) train_raw = load_corpus(cfg.train, "corpus.train (bias selection)");

  // The alphabet comes from the long-term model when there is one.
  std::vector<std::optional<TrainedModel>> models(cfg.hybrid_sources.size());
  std::optional<std::vector<int>> alphabet;
  for (std::size_t i = 0; i < cfg.hybrid_sources.size(); ++i) {
    const auto& src = cfg.hybrid_sources[i];
    if (src.kind != "ltm") continue;
    models[i] = load_model_file(src.model.empty() ? cfg.model : src.model);
    if (alphabet && *alphabet != models[i]->alphabet) throw ValidationError("hybrid sources use different alphabets");
    alphabet = models[i]->alphabet;
  }
  if (!alphabet) alphabet = union_alphabet(test_raw, train_raw ? &*train_raw : nullptr);
  const Corpus test = with_alphabet(test_raw, *alphabet);
  std::optional<Corpus> train;
  if (train_raw) train = with_alphabet(*train_raw, *alphabet);

  const auto source_on = [&](std::size_t i, const Corpus& corpus, bool on_train) -> Distributions {
    const auto& src = cfg.hybrid_sources[i];
    if (src.kind == "ltm") return predict_corpus(*models[i], corpus, workers(cfg));
    if (src.kind == "stm") return online_predictions(cfg, corpus, *alphabet, StmModel::Pulse);
    if (src.kind == "ngram") return online_predictions(cfg, corpus, *alphabet, StmModel::NGram);
    const auto& path = on_train ? src.train : src.test;
    if (path.empty()) throw ConfigError("csv hybrid source needs a 'train' file to select the bias");
    return load_distributions(path, corpus, *alphabet);
  };

  const std::size_t m = cfg.hybrid_sources.size();
  std::vector<Distributions> test_d(m);
  for (std::size_t i = 0; i < m; ++i) test_d[i] = source_on(i, test, false);

  double bias = cfg.hybrid_bias.value_or(0.0);
  if (select) {
    std::vector<std::vector<PredictiveDistribution>> sources(m);
    for (std::size_t i = 0; i < m; ++i) sources[i] = flatten(source_on(i, *train, true));
    bias = select_bias(sources, truth_indices(*train, *alphabet), cfg.hybrid_rule);
  }

  Distributions hybrid(test.size());
  const CombinationConfig cc{cfg.hybrid_rule, bias};
  for (std::size_t s = 0; s < test.size(); ++s) {
    for (std::size_t t = 0; t < test.sequences()[s].size(); ++t) {
      std::vector<PredictiveDistribution> at;
      for (std::size_t i = 0; i < m; ++i) at.push_back(test_d[i][s][t]);
      hybrid[s].push_back(combine(at, cc));
    }
  }

  auto csv = open_report(cfg, "hybrid.csv");
  csv << "source,kind,mean_bits,accuracy\n";
  for (std::size_t i = 0; i < m; ++i) {
    const EvalReport r = cross_entropy(test, *alphabet, test_d[i]);
    csv << i << ',' << cfg.hybrid_sources[i].kind << ',' << format_double(r.mean_bits) << ','
        << format_double(r.accuracy) << '\n';
  }
  const EvalReport hr = cross_entropy(test, *alphabet, hybrid);
  csv << "hybrid," << to_string(cfg.hybrid_rule) << ',' << format_double(hr.mean_bits) << ','
      << format_double(hr.accuracy) << '\n';
  {
    auto f = open_report(cfg, "hybrid_distributions.csv");
    write_distributions(f, test, *alphabet, hybrid);
  }
  out << "bias " << format_double(bias) << "\nmean_bits " << format_double(hr.mean_bits) << '\n';
  return kExitOk;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out) {
  const TrainedModel model = load_model_file(cfg.model);
  for (int p : cfg.generation.prime) {
    if (!std::binary_search(model.alphabet.begin(), model.alphabet.end(), p)) {
      throw ConfigError("generation.prime pitch " + std::to_string(p) + " is outside the model alphabet");
    }
  }
  const LtmNextEventModel next(model, cfg.generation.prime);
  const GenerationResult r = generate(next, cfg.generation);
  {
    auto f = open_report(cfg, "generated.txt");
    f << serialize_sequence(make_sequence("generated", r.sequence)) << '\n';
  }
  auto csv = open_report(cfg, "generation.csv");
  csv << "t,pitch,role,p,max_p,bits\n";
  const std::size_t n_prime = cfg.generation.prime.size();
  for (std::size_t t = 0; t < r.sequence.size(); ++t) {
    csv << t << ',' << r.sequence[t];
    if (t < n_prime) {
      csv << ",prime,,,\n";
    } else {
      const double p = r.chosen_p[t - n_prime];
      csv << ",generated," << format_double(p) << ',' << format_double(r.max_p[t - n_prime]) << ','
          << format_double(-std::log2(p)) << '\n';
    }
  }
  out << "sequence";
  for (int p : r.sequence) out << ' ' << p;
  out << "\nmean_bits " << format_double(r.mean_bits) << '\n';
  return kExitOk;
}

int cmd_analyze(const RunConfig& cfg, std::ostream& out) {
  const TrainedModel model = load_model_file(cfg.model);
  const AnalysisReport r = analyze(model, cfg.motifs_per_length);
  {
    auto f = open_report(cfg, "type_shares.csv");
    write_type_shares(f, r);
  }
  {
    auto f = open_report(cfg, "zero_order.csv");
    write_zero_order(f, r);
  }
  {
    auto f = open_report(cfg, "motifs.csv");
    write_motifs(f, r);
  }
  {
    auto f = open_report(cfg, "sigma_length.csv");
    write_sigma_length(f, r);
  }
  {
    auto f = open_report(cfg, "length_holes.csv");
    write_length_holes(f, r);
  }
  out << "features " << r.total_features << "\ntotal_abs_weight " << format_double(r.total_abs_weight) << '\n';
  return kExitOk;
}

double validation_bits(const RunConfig& cfg, const Corpus& corpus, bool short_term) {
  if (short_term) {
    const Distributions d = online_predictions(cfg, corpus, corpus.alphabet(), cfg.stm_model);
    return cross_entropy(corpus, corpus.alphabet(), d).mean_bits;
  }
  auto [train, val] = holdout(corpus, cfg.validation_fraction, cfg.seed);
  LtmConfig ltm = cfg.ltm;
  ltm.threads = 1;
  return ltm_bits(ltm, train, val);
}

int cmd_grid_search(const RunConfig& cfg, std::ostream& out) {
  const Corpus corpus = load_corpus(cfg.train, "corpus.train");
  const std::string& param = cfg.grid.parameter;
  const auto& current = get_path(cfg.document, param);
  if (!current.is_number()) throw ConfigError("grid.parameter '" + param + "' is not a numeric setting");
  const bool short_term = param.rfind("stm.", 0) == 0;
  const std::vector<double> values = grid_values(cfg.grid, cfg.seed);

  const auto configured = [&](double v) {
    nlohmann::json doc = cfg.document;
    set_path(doc, param, current.is_number_integer() ? nlohmann::json(static_cast<std::int64_t>(std::llround(v)))
                                                     : nlohmann::json(v));
    RunConfig c = parse_config(doc, cfg.base_dir);
    // Keep command-line overrides of the seed and worker count.
    c.seed = cfg.seed;
    c.threads = 1;
    c.ltm.opt.seed = c.stm.opt.seed = cfg.seed;
    c.ltm.threads = 1;
    c.document = doc;
    return c;
  };
  for (double v : values) configured(v);  // reject invalid points before any training

  const GridResult r = grid_search(values, [&](double v) { return validation_bits(configured(v), corpus, short_term); },
                                   workers(cfg));
  {
    auto f = open_report(cfg, "grid_trace.csv");
    write_trace(f, r);
  }
  {
    auto f = open_report(cfg, "best_config.json");
    f << configured(r.best_value()).document.dump(2) << '\n';
  }
  out << "best " << param << ' ' << format_double(r.best_value()) << "\nvalidation_bits " << format_double(r.best_score())
      << '\n';
  return kExitOk;
}

int run_command(std::string_view name, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (name == "ingest-check") return cmd_ingest_check(cfg, out);
    if (name == "train-ltm") return cmd_train_ltm(cfg, out);
    if (name == "stm-eval") return cmd_stm_eval(cfg, out);
    if (name == "cv") return cmd_cv(cfg, out);
    if (name == "hybrid") return cmd_hybrid(cfg, out);
    if (name == "generate") return cmd_generate(cfg, out);
    if (name == "analyze") return cmd_analyze(cfg, out);
    if (name == "grid-search") return cmd_grid_search(cfg, out);
    err << "error: unknown command '" << name << "'\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitNotConverged;
  } catch (const std::exception& e) {
    // Configuration, parse, validation and argument errors.
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace pulse::cli
