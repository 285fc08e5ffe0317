#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "pulse/cli/config.hpp"
#include "pulse/corpus.hpp"

namespace pulse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNotConverged = 3;

inline const std::vector<std::string> kCommands{"ingest-check", "train-ltm", "stm-eval", "cv",
                                                "hybrid",       "generate",  "analyze",  "grid-search"};

// Each command writes its reports under cfg.output and a short summary to
// `out`. Errors are thrown; run_command maps them to exit codes.
int cmd_ingest_check(const RunConfig& cfg, std::ostream& out);
int cmd_train_ltm(const RunConfig& cfg, std::ostream& out);
int cmd_stm_eval(const RunConfig& cfg, std::ostream& out);
int cmd_cv(const RunConfig& cfg, std::ostream& out);
int cmd_hybrid(const RunConfig& cfg, std::ostream& out);
int cmd_generate(const RunConfig& cfg, std::ostream& out);
int cmd_analyze(const RunConfig& cfg, std::ostream& out);
int cmd_grid_search(const RunConfig& cfg, std::ostream& out);

// Dispatches by name; configuration and input errors become exit 2 with a
// message on `err`.
int run_command(std::string_view name, const RunConfig& cfg, std::ostream& out, std::ostream& err);

// Mean held-out bits of the configuration: long-term model trained on the
// training share of `corpus` and scored on a seeded validation share, or,
// for stm.* parameters, the online model's mean bits over `corpus`.
double validation_bits(const RunConfig& cfg, const Corpus& corpus, bool short_term);

}  // namespace pulse::cli
