#include "pulse/model_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "pulse/error.hpp"

namespace pulse {
namespace {

constexpr std::string_view kMagic = "pulse-model";
constexpr int kVersion = 1;

double parse_double(std::string_view s, const std::string& source, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError(source, line, "bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string> words(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string w; ss >> w;) out.push_back(w);
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void save_model(std::ostream& out, const TrainedModel& m) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "spec " << m.spec.format() << '\n';
  out << "expansion " << to_string(m.expansion) << '\n';
  out << "l1 " << to_string(m.reg.l1_kind) << ' ' << format_double(m.reg.l1_alpha) << ' '
      << format_double(m.reg.lambda1) << '\n';
  out << "l2 " << to_string(m.reg.l2_kind) << ' ' << format_double(m.reg.l2_alpha) << ' '
      << format_double(m.reg.lambda2) << '\n';
  out << "decay " << (m.reg.decay ? 1 : 0) << ' ' << format_double(m.reg.tau1) << ' ' << format_double(m.reg.tau2)
      << '\n';
  out << "alphabet";
  for (int p : m.alphabet) out << ' ' << p;
  out << '\n';
  out << "key_major";
  for (double v : m.profiles.major) out << ' ' << format_double(v);
  out << "\nkey_minor";
  for (double v : m.profiles.minor) out << ' ' << format_double(v);
  out << '\n';
  out << "key_duration_weighted " << (m.duration_weighted_key ? 1 : 0) << '\n';
  out << "converged " << (m.converged ? 1 : 0) << '\n';
  out << "corpus_hash " << (m.corpus_hash.empty() ? "-" : m.corpus_hash) << '\n';
  out << "seed " << m.seed << '\n';
  out << "epochs " << m.epochs << '\n';
  out << "iterations " << m.iterations << '\n';
  out << "features " << m.features.size() << '\n';
  for (std::size_t i = 0; i < m.features.size(); ++i) {
    out << format_double(m.features.weights()[i]) << '\t' << format_feature(m.features.feature(i)) << '\n';
  }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  save_model(out, model);
  if (!out) throw std::runtime_error("error writing model file " + path.string());
}

TrainedModel load_model(std::istream& in, const std::string& source) {
  TrainedModel m;
  std::string line;
  std::size_t line_no = 0;
  const auto next = [&]() -> std::vector<std::string> {
    if (!std::getline(in, line)) throw ParseError(source, line_no, "unexpected end of model file");
    ++line_no;
    return words(line);
  };
  const auto expect = [&](const std::vector<std::string>& w, std::string_view key, std::size_t min_size) {
    if (w.empty() || w[0] != key || w.size() < min_size) {
      throw ParseError(source, line_no, "expected '" + std::string(key) + "'");
    }
  };

  auto w = next();
  if (w.size() != 2 || w[0] != kMagic) throw ParseError(source, line_no, "not a model file");
  if (w[1] != std::to_string(kVersion)) throw ParseError(source, line_no, "unsupported model version " + w[1]);

  try {
    if (!std::getline(in, line)) throw ParseError(source, line_no, "unexpected end of model file");
    ++line_no;
    if (line.rfind("spec ", 0) != 0) throw ParseError(source, line_no, "expected 'spec'");
    m.spec = NPlusSpec::parse(line.substr(5));

    w = next();
    expect(w, "expansion", 2);
    m.expansion = parse_expansion(w[1]);
    w = next();
    expect(w, "l1", 4);
    m.reg.l1_kind = parse_reg_kind(w[1]);
    m.reg.l1_alpha = parse_double(w[2], source, line_no);
    m.reg.lambda1 = parse_double(w[3], source, line_no);
    w = next();
    expect(w, "l2", 4);
    m.reg.l2_kind = parse_reg_kind(w[1]);
    m.reg.l2_alpha = parse_double(w[2], source, line_no);
    m.reg.lambda2 = parse_double(w[3], source, line_no);
    w = next();
    expect(w, "decay", 4);
    m.reg.decay = w[1] == "1";
    m.reg.tau1 = parse_double(w[2], source, line_no);
    m.reg.tau2 = parse_double(w[3], source, line_no);

    w = next();
    expect(w, "alphabet", 2);
    for (std::size_t i = 1; i < w.size(); ++i) m.alphabet.push_back(static_cast<int>(parse_double(w[i], source, line_no)));
    if (!std::is_sorted(m.alphabet.begin(), m.alphabet.end()) ||
        std::adjacent_find(m.alphabet.begin(), m.alphabet.end()) != m.alphabet.end()) {
      throw ParseError(source, line_no, "alphabet must be sorted and unique");
    }
    w = next();
    expect(w, "key_major", 13);
    for (std::size_t i = 0; i < 12; ++i) m.profiles.major[i] = parse_double(w[i + 1], source, line_no);
    w = next();
    expect(w, "key_minor", 13);
    for (std::size_t i = 0; i < 12; ++i) m.profiles.minor[i] = parse_double(w[i + 1], source, line_no);
    w = next();
    expect(w, "key_duration_weighted", 2);
    m.duration_weighted_key = w[1] == "1";
    w = next();
    expect(w, "converged", 2);
    m.converged = w[1] == "1";
    w = next();
    expect(w, "corpus_hash", 2);
    m.corpus_hash = w[1] == "-" ? "" : w[1];
    w = next();
    expect(w, "seed", 2);
    m.seed = std::stoull(w[1]);
    w = next();
    expect(w, "epochs", 2);
    m.epochs = std::stoull(w[1]);
    w = next();
    expect(w, "iterations", 2);
    m.iterations = std::stoull(w[1]);
    w = next();
    expect(w, "features", 2);
    const std::size_t n = std::stoull(w[1]);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw ParseError(source, line_no, "missing feature lines");
      ++line_no;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw ParseError(source, line_no, "expected '<weight>\\t<feature>'");
      const double weight = parse_double(std::string_view(line).substr(0, tab), source, line_no);
      if (!m.features.add(parse_feature(std::string_view(line).substr(tab + 1)), weight)) {
        throw ParseError(source, line_no, "duplicate feature");
      }
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(source, line_no, e.what());
  }
  return m;
}

TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  return load_model(in, path.string());
}

}  // namespace pulse
