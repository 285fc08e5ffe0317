#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pulse/cli/config.hpp"

namespace pulse::cli {

struct GridTraceRow {
  std::size_t index = 0;
  double value = 0.0;
  double score = 0.0;  // validation bits; lower is better
};

struct GridResult {
  std::size_t best = 0;
  std::vector<GridTraceRow> trace;

  double best_value() const { return trace[best].value; }
  double best_score() const { return trace[best].score; }
};

// Explicit values in order, or `random` log-uniform draws in [low, high].
std::vector<double> grid_values(const GridConfig& grid, std::uint64_t seed);

// Scores every value (in parallel, results kept by index) and returns the
// argmin; ties and NaNs resolve to the earliest finite minimum.
GridResult grid_search(std::span<const double> values, const std::function<double(double)>& score,
                       std::size_t threads);

// index,value,validation_bits
void write_trace(std::ostream& out, const GridResult& r);

}  // namespace pulse::cli
