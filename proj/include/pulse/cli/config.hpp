#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pulse/evalgen.hpp"
#include "pulse/pulse.hpp"

namespace pulse::cli {

// Bad command line or configuration document; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Online source for stm-eval and hybrid.
enum class StmModel { Pulse, NGram };

// One input of the hybrid command: the long-term model file, an online
// short-term model, or precomputed distributions.
struct HybridSource {
  std::string kind;  // "ltm", "stm", "ngram" or "csv"
  std::filesystem::path model;
  std::filesystem::path test;   // csv: distributions on the test corpus
  std::filesystem::path train;  // csv: distributions on the training corpus
};

struct GridConfig {
  std::string parameter;  // dotted config path, e.g. "ltm.regularization.lambda1"
  std::vector<double> values;
  // > 0: draw this many log-uniform values in [low, high] instead.
  std::size_t random = 0;
  double low = 0.0;
  double high = 0.0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  std::filesystem::path train;
  std::filesystem::path test;
  std::filesystem::path folds;
  std::size_t k = 10;

  std::filesystem::path model;
  std::filesystem::path output = "out";

  LtmConfig ltm;
  // Candidate lambda1 values picked per fold on a held-out 10% of the
  // training sequences; empty disables the inner search.
  std::vector<double> cv_lambda1_grid;
  double validation_fraction = 0.1;

  StmConfig stm;
  StmModel stm_model = StmModel::Pulse;
  std::size_t ngram_order = 0;

  std::vector<HybridSource> hybrid_sources;
  CombinationRule hybrid_rule = CombinationRule::Product;
  std::optional<double> hybrid_bias;

  GenerationConfig generation;
  GridConfig grid;
  std::size_t motifs_per_length = 1;

  // The merged document (defaults plus overrides) the fields came from, and
  // the directory its relative paths are resolved against.
  nlohmann::json document;
  std::filesystem::path base_dir;
};

// Every accepted key with its default value.
nlohmann::json default_document();

// Overlays `overrides` onto the defaults; unknown keys and wrong value types
// throw ConfigError. Relative paths are resolved against `base_dir`.
RunConfig parse_config(const nlohmann::json& overrides, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

// Replaces the value at a dotted path; the path must already exist.
void set_path(nlohmann::json& doc, const std::string& dotted, const nlohmann::json& value);
const nlohmann::json& get_path(const nlohmann::json& doc, const std::string& dotted);

}  // namespace pulse::cli
