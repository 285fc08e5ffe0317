#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pulse/cli/commands.hpp"
#include "pulse/cli/config.hpp"
#include "pulse/parallel.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string output;
  std::vector<std::string> sets;
};

// `--set a.b=value`: the value is read as JSON when it parses, else as a string.
void apply_set(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw pulse::cli::ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  pulse::cli::set_path(doc, key, value);
}

pulse::cli::RunConfig build_config(const Options& o) {
  using namespace pulse::cli;
  RunConfig cfg = o.config.empty() ? parse_config(nlohmann::json::object()) : load_config(o.config);
  nlohmann::json doc = cfg.document;
  if (o.seed) doc["seed"] = *o.seed;
  if (o.threads) doc["threads"] = *o.threads;
  if (!o.output.empty()) doc["output"] = o.output;
  for (const auto& s : o.sets) apply_set(doc, s);
  cfg = parse_config(doc, cfg.base_dir);
  cfg.threads = pulse::resolve_threads(cfg.threads);
  cfg.ltm.threads = cfg.threads;
  cfg.generation.threads = cfg.threads;
  return cfg;
}

const std::map<std::string, std::string> kDescriptions{
    {"ingest-check", "parse and validate the corpus and fold files"},
    {"train-ltm", "train a long-term model on corpus.train"},
    {"stm-eval", "run the online short-term model over each sequence"},
    {"cv", "k-fold cross-validation of the long-term model"},
    {"hybrid", "combine model predictions on corpus.test"},
    {"generate", "generate a melody from a trained model"},
    {"analyze", "summarize the features of a trained model"},
    {"grid-search", "search one numeric setting by validation bits"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulse: sparse log-linear models of melody"};
  app.require_subcommand(1);
  Options opts;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (const auto& name : pulse::cli::kCommands) {
    CLI::App* sub = app.add_subcommand(std::string(name), kDescriptions.at(std::string(name)));
    sub->add_option("-c,--config", opts.config, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "random seed");
    sub->add_option("--threads", opts.threads, "worker threads (0 = all cores, capped by PULSE_SEQ_THREADS)");
    sub->add_option("-o,--output", opts.output, "output directory");
    sub->add_option("--set", opts.sets, "override a config value, e.g. --set ltm.regularization.lambda1=0.01");
    subs.emplace_back(std::string(name), sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? pulse::cli::kExitOk : pulse::cli::kExitUsage;
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }
  pulse::cli::RunConfig cfg;
  try {
    cfg = build_config(opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pulse::cli::kExitUsage;
  }
  return pulse::cli::run_command(command, cfg, std::cout, std::cerr);
}
