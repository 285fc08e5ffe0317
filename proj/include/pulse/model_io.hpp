#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "pulse/pulse.hpp"

namespace pulse {

// Line-oriented text format, version 1:
//   pulse-model 1
//   key value...          (header lines)
//   features <n>
//   <weight>\t<feature>   (n lines)
// Weights are written in shortest round-trip form.
void save_model(std::ostream& out, const TrainedModel& model);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
// Throws ParseError on malformed input.
TrainedModel load_model(std::istream& in, const std::string& source = "<stream>");
TrainedModel load_model(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace pulse
