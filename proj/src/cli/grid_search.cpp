#include "pulse/cli/grid_search.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "pulse/model_io.hpp"
#include "pulse/parallel.hpp"

namespace pulse::cli {

std::vector<double> grid_values(const GridConfig& grid, std::uint64_t seed) {
  if (grid.random == 0) {
    if (grid.values.empty()) throw ConfigError("grid.values is empty and grid.random is 0");
    return grid.values;
  }
  if (!(grid.low > 0.0 && grid.high >= grid.low)) throw ConfigError("random grid needs 0 < grid.low <= grid.high");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(std::log(grid.low), std::log(grid.high));
  std::vector<double> out(grid.random);
  for (auto& v : out) v = std::exp(u(rng));
  return out;
}

GridResult grid_search(std::span<const double> values, const std::function<double(double)>& score,
                       std::size_t threads) {
  if (values.empty()) throw ConfigError("grid search needs at least one value");
  GridResult r;
  r.trace.resize(values.size());
  parallel_for(values.size(), threads, [&](std::size_t i) {
    r.trace[i] = GridTraceRow{i, values[i], score(values[i])};
  });
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const double s = r.trace[i].score;
    if (std::isnan(s)) continue;
    if (!found || s < best) {
      best = s;
      r.best = i;
      found = true;
    }
  }
  return r;
}

void write_trace(std::ostream& out, const GridResult& r) {
  out << "index,value,validation_bits\n";
  for (const auto& row : r.trace) out << row.index << ',' << format_double(row.value) << ',' << format_double(row.score) << '\n';
}

}  // namespace pulse::cli
