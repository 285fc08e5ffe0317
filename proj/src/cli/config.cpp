#include "pulse/cli/config.hpp"

#include <fstream>
#include <sstream>

namespace pulse::cli {
namespace {

using nlohmann::json;

json regularization_block(const RegularizationSpec& r) {
  return {
      {"l1_kind", std::string(to_string(r.l1_kind))},
      {"l1_alpha", r.l1_alpha},
      {"l2_kind", std::string(to_string(r.l2_kind))},
      {"l2_alpha", r.l2_alpha},
      {"lambda1", r.lambda1},
      {"lambda2", r.lambda2},
      {"decay", r.decay},
      {"tau1", r.tau1},
      {"tau2", r.tau2},
  };
}

json optimizer_block(const OptimizerConfig& o) {
  return {
      {"algorithm", std::string(to_string(o.algorithm))},
      {"eta", o.eta},
      {"igsav", o.igsav},
      {"rho", o.rho},
      {"epsilon", o.epsilon},
      {"batch_size", o.batch_size},
      {"max_epochs", o.max_epochs},
  };
}

json convergence_block(const ConvergenceConfig& c) {
  return {
      {"gamma_loss", c.gamma_loss},
      {"tau_loss", c.tau_loss},
      {"gamma_active", c.gamma_active},
      {"tau_active", c.tau_active},
  };
}

const json& hybrid_source_schema() {
  static const json schema = {{"kind", "ltm"}, {"model", ""}, {"test", ""}, {"train", ""}};
  return schema;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

// Overlays `over` onto `base` in place; `where` names the position for errors.
void merge(json& base, const json& over, const std::string& where) {
  if (!over.is_object()) throw ConfigError(where.empty() ? "configuration must be an object" : where + " must be an object");
  for (const auto& [key, value] : over.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown configuration key '" + path + "'");
    json& slot = base[key];
    if (path == "hybrid.sources") {
      if (!value.is_array() || value.size() < 2) throw ConfigError("hybrid.sources must list at least two sources");
      json list = json::array();
      for (std::size_t i = 0; i < value.size(); ++i) {
        json item = hybrid_source_schema();
        merge(item, value[i], path + "[" + std::to_string(i) + "]");
        list.push_back(item);
      }
      slot = list;
    } else if (slot.is_object()) {
      merge(slot, value, path);
    } else if (path == "hybrid.bias") {
      if (!value.is_null() && !value.is_number()) throw ConfigError("hybrid.bias must be a number or null");
      slot = value;
    } else if (slot.is_array()) {
      if (!value.is_array()) throw ConfigError(path + " must be a list");
      for (const auto& v : value) {
        if (!v.is_number()) throw ConfigError(path + " must be a list of numbers");
      }
      slot = value;
    } else {
      if (!same_kind(slot, value)) throw ConfigError("wrong type for '" + path + "'");
      if (slot.is_number_unsigned() && !(value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0))) {
        throw ConfigError("'" + path + "' must be a non-negative integer");
      }
      if (slot.is_number_integer() && value.is_number_float()) throw ConfigError("'" + path + "' must be an integer");
      slot = value;
    }
  }
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename F>
auto checked(const std::string& what, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

RegularizationSpec read_regularization(const json& j) {
  RegularizationSpec r;
  r.l1_kind = parse_reg_kind(j.at("l1_kind").get<std::string>());
  r.l1_alpha = j.at("l1_alpha").get<double>();
  r.l2_kind = parse_reg_kind(j.at("l2_kind").get<std::string>());
  r.l2_alpha = j.at("l2_alpha").get<double>();
  r.lambda1 = j.at("lambda1").get<double>();
  r.lambda2 = j.at("lambda2").get<double>();
  r.decay = j.at("decay").get<bool>();
  r.tau1 = j.at("tau1").get<double>();
  r.tau2 = j.at("tau2").get<double>();
  r.validate();
  return r;
}

OptimizerConfig read_optimizer(const json& j, std::uint64_t seed) {
  OptimizerConfig o;
  o.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  o.eta = j.at("eta").get<double>();
  o.igsav = j.at("igsav").get<double>();
  o.rho = j.at("rho").get<double>();
  o.epsilon = j.at("epsilon").get<double>();
  o.batch_size = j.at("batch_size").get<std::size_t>();
  o.max_epochs = j.at("max_epochs").get<std::size_t>();
  o.seed = seed;
  o.validate();
  return o;
}

ConvergenceConfig read_convergence(const json& j, ConvergenceMode mode) {
  ConvergenceConfig c;
  c.gamma_loss = j.at("gamma_loss").get<double>();
  c.tau_loss = j.at("tau_loss").get<double>();
  c.gamma_active = j.at("gamma_active").get<double>();
  c.tau_active = j.at("tau_active").get<double>();
  c.mode = mode;
  c.validate();
  return c;
}

}  // namespace

json default_document() {
  const LtmConfig ltm;
  const StmConfig stm;
  const GenerationConfig gen;
  const OuterConvergence outer;
  return {
      {"seed", std::uint64_t{0}},
      {"threads", std::size_t{1}},
      {"corpus", {{"train", ""}, {"test", ""}, {"folds", ""}, {"k", std::size_t{10}}}},
      {"model", ""},
      {"output", "out"},
      {"key_profiles", ""},
      {"duration_weighted_key", true},
      {"ltm",
       {
           {"spec", ltm.spec.format()},
           {"expansion", std::string(to_string(ltm.expansion))},
           {"feature_cap", ltm.feature_cap},
           {"regularization", regularization_block(ltm.reg)},
           {"optimizer", optimizer_block(ltm.opt)},
           {"convergence", convergence_block(ltm.conv)},
           {"outer",
            {
                {"criterion", std::string(to_string(outer.criterion))},
                {"gamma", outer.gamma},
                {"tau", outer.tau},
                {"max_iterations", outer.max_iterations},
                {"validation_fraction", outer.validation_fraction},
            }},
       }},
      {"cv", {{"lambda1_grid", json::array()}, {"validation_fraction", 0.1}}},
      {"stm",
       {
           {"model", "pulse"},
           {"ngram_order", std::size_t{0}},
           {"spec", stm.spec.format()},
           {"expansion", std::string(to_string(stm.expansion))},
           {"regularization", regularization_block(stm.reg)},
           {"optimizer", optimizer_block(stm.opt)},
           {"convergence", convergence_block(stm.conv)},
       }},
      {"hybrid",
       {
           {"rule", "product"},
           {"bias", nullptr},
           {"sources", json::array({{{"kind", "ltm"}, {"model", ""}, {"test", ""}, {"train", ""}},
                                    {{"kind", "stm"}, {"model", ""}, {"test", ""}, {"train", ""}}})},
       }},
      {"generation",
       {
           {"method", std::string(to_string(gen.method))},
           {"beams", gen.beams},
           {"threshold", gen.threshold},
           {"length", gen.length},
           {"prime", json::array()},
           {"restarts", gen.restarts},
       }},
      {"analysis", {{"motifs_per_length", std::size_t{1}}}},
      {"grid", {{"parameter", "ltm.regularization.lambda1"}, {"values", json::array()}, {"random", std::size_t{0}}, {"low", 0.0}, {"high", 0.0}}},
  };
}

void set_path(json& doc, const std::string& dotted, const json& value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown configuration key '" + dotted + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("'" + dotted + "' is a section, not a setting");
  if (node->is_array() && !value.is_array()) throw ConfigError("'" + dotted + "' expects a list");
  *node = value;
}

const json& get_path(const json& doc, const std::string& dotted) {
  const json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown configuration key '" + dotted + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) return *node;
    start = dot + 1;
  }
}

RunConfig parse_config(const json& overrides, const std::filesystem::path& base_dir) {
  json doc = default_document();
  merge(doc, overrides, "");

  RunConfig c;
  c.document = doc;
  c.base_dir = base_dir;
  checked("configuration", [&] {
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.threads = doc.at("threads").get<std::size_t>();
    const json& corpus = doc.at("corpus");
    c.train = resolve(corpus.at("train").get<std::string>(), base_dir);
    c.test = resolve(corpus.at("test").get<std::string>(), base_dir);
    c.folds = resolve(corpus.at("folds").get<std::string>(), base_dir);
    c.k = corpus.at("k").get<std::size_t>();
    c.model = resolve(doc.at("model").get<std::string>(), base_dir);
    c.output = resolve(doc.at("output").get<std::string>(), base_dir);
    return 0;
  });

  const auto profiles_path = resolve(doc.at("key_profiles").get<std::string>(), base_dir);
  const KeyProfiles profiles =
      profiles_path.empty() ? KeyProfiles::shipped() : checked("key_profiles", [&] { return KeyProfiles::load(profiles_path); });
  const bool weighted = doc.at("duration_weighted_key").get<bool>();

  checked("ltm", [&] {
    const json& j = doc.at("ltm");
    c.ltm.spec = NPlusSpec::parse(j.at("spec").get<std::string>());
    c.ltm.expansion = parse_expansion(j.at("expansion").get<std::string>());
    c.ltm.feature_cap = j.at("feature_cap").get<std::size_t>();
    c.ltm.reg = read_regularization(j.at("regularization"));
    c.ltm.opt = read_optimizer(j.at("optimizer"), c.seed);
    c.ltm.conv = read_convergence(j.at("convergence"), ConvergenceMode::ActiveOrLoss);
    const json& o = j.at("outer");
    c.ltm.outer.criterion = parse_outer_criterion(o.at("criterion").get<std::string>());
    c.ltm.outer.gamma = o.at("gamma").get<double>();
    c.ltm.outer.tau = o.at("tau").get<double>();
    c.ltm.outer.max_iterations = o.at("max_iterations").get<std::size_t>();
    c.ltm.outer.validation_fraction = o.at("validation_fraction").get<double>();
    c.ltm.outer.validate();
    c.ltm.profiles = profiles;
    c.ltm.duration_weighted_key = weighted;
    c.ltm.threads = c.threads;
    return 0;
  });

  checked("cv", [&] {
    const json& j = doc.at("cv");
    c.cv_lambda1_grid = j.at("lambda1_grid").get<std::vector<double>>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
    if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
      throw ConfigError("cv.validation_fraction must be in (0, 1)");
    }
    for (double v : c.cv_lambda1_grid) {
      if (v < 0.0) throw ConfigError("cv.lambda1_grid values must be >= 0");
    }
    return 0;
  });

  checked("stm", [&] {
    const json& j = doc.at("stm");
    const auto model = j.at("model").get<std::string>();
    if (model == "pulse") {
      c.stm_model = StmModel::Pulse;
    } else if (model == "ngram") {
      c.stm_model = StmModel::NGram;
    } else {
      throw ConfigError("stm.model must be 'pulse' or 'ngram'");
    }
    c.ngram_order = j.at("ngram_order").get<std::size_t>();
    c.stm.spec = NPlusSpec::parse(j.at("spec").get<std::string>());
    if (c.stm.spec.needs_key()) throw ConfigError("stm.spec cannot use key-dependent viewpoints");
    c.stm.expansion = parse_expansion(j.at("expansion").get<std::string>());
    c.stm.reg = read_regularization(j.at("regularization"));
    c.stm.opt = read_optimizer(j.at("optimizer"), c.seed);
    c.stm.conv = read_convergence(j.at("convergence"), ConvergenceMode::ActiveOrLoss);
    return 0;
  });

  checked("hybrid", [&] {
    const json& j = doc.at("hybrid");
    c.hybrid_rule = parse_combination_rule(j.at("rule").get<std::string>());
    if (!j.at("bias").is_null()) {
      c.hybrid_bias = j.at("bias").get<double>();
      if (*c.hybrid_bias < 0.0) throw ConfigError("hybrid.bias must be >= 0");
    }
    for (const json& s : j.at("sources")) {
      HybridSource src;
      src.kind = s.at("kind").get<std::string>();
      if (src.kind != "ltm" && src.kind != "stm" && src.kind != "ngram" && src.kind != "csv") {
        throw ConfigError("hybrid source kind must be ltm, stm, ngram or csv");
      }
      src.model = resolve(s.at("model").get<std::string>(), base_dir);
      src.test = resolve(s.at("test").get<std::string>(), base_dir);
      src.train = resolve(s.at("train").get<std::string>(), base_dir);
      if (src.kind == "csv" && src.test.empty()) throw ConfigError("csv hybrid sources need a 'test' file");
      c.hybrid_sources.push_back(std::move(src));
    }
    return 0;
  });

  checked("generation", [&] {
    const json& j = doc.at("generation");
    c.generation.method = parse_generation_method(j.at("method").get<std::string>());
    c.generation.beams = j.at("beams").get<std::size_t>();
    c.generation.threshold = j.at("threshold").get<double>();
    c.generation.length = j.at("length").get<std::size_t>();
    for (const json& p : j.at("prime")) {
      if (!p.is_number_integer()) throw ConfigError("generation.prime must list integer pitches");
      c.generation.prime.push_back(p.get<int>());
    }
    c.generation.restarts = j.at("restarts").get<std::size_t>();
    c.generation.seed = c.seed;
    c.generation.threads = c.threads;
    c.generation.validate();
    return 0;
  });

  checked("grid", [&] {
    const json& j = doc.at("grid");
    c.grid.parameter = j.at("parameter").get<std::string>();
    c.grid.values = j.at("values").get<std::vector<double>>();
    c.grid.random = j.at("random").get<std::size_t>();
    c.grid.low = j.at("low").get<double>();
    c.grid.high = j.at("high").get<double>();
    c.motifs_per_length = doc.at("analysis").at("motifs_per_length").get<std::size_t>();
    return 0;
  });
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

}  // namespace pulse::cli
