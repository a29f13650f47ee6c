#include "lomo/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lomo::cli {

namespace {

const std::map<std::string, std::map<std::string, std::string>>& schema() {
  static const std::map<std::string, std::map<std::string, std::string>> s = {
      {"run", {{"seed", "1"}, {"out", "runs"}}},
      {"data", {{"n_videos", "200"}, {"frames", "10"}, {"size", "64"}}},
      {"codec",
       {{"epochs", "18"},
        {"batch", "16"},
        {"lr", "0.002"},
        {"holdout_frac", "0.1"}}},
      {"lofnet",
       {{"iters", "2000"},
        {"lr", "0.0005"},
        {"holdout_frac", "0.1"},
        {"sigma", "0.1"},
        {"hidden", "64"}}},
      {"diffusion",
       {{"iters", "3000"},
        {"lr", "0.0005"},
        {"width", "64"},
        {"heads", "4"},
        {"groups", "8"},
        {"time_dim", "128"},
        {"cond_dim", "64"},
        {"log_every", "50"}}},
      {"finetune",
       {{"rank", "4"},
        {"alpha", "4"},
        {"iterations", "250"},
        {"lr", "0.0005"},
        {"warp_window", "850-1000"},
        {"single_frame", "false"}}},
      {"transfer",
       {{"t_inv", "980"},
        {"steps", "50"},
        {"gamma", "0.1"},
        {"hist_match", "true"}}},
      {"eval", {{"holdout_frac", "0.1"}}},
      {"paths",
       {{"dataset", ""},
        {"codec", ""},
        {"latents", ""},
        {"lofnet", ""},
        {"denoiser", ""},
        {"adapter", ""},
        {"source", ""},
        {"driving", ""},
        {"runs", ""}}},
  };
  return s;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig::RunConfig() : values_(schema()) {}

void RunConfig::set(const std::string& section, const std::string& key,
                    const std::string& value) {
  auto sit = values_.find(section);
  if (sit == values_.end())
    throw std::invalid_argument("unknown config section [" + section + "]");
  auto kit = sit->second.find(key);
  if (kit == sit->second.end())
    throw std::invalid_argument("unknown config key " + section + "." + key);
  kit->second = value;
}

void RunConfig::apply_text(const std::string& text,
                           const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                    ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!values_.count(section))
        throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                    ": unknown config section [" + section +
                                    "]");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    if (section.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    try {
      set(section, key, trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path);
}

void RunConfig::apply_override(const std::string& spec) {
  const size_t eq = spec.find('=');
  const size_t dot = spec.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw std::invalid_argument("--set expects section.key=value, got: " +
                                spec);
  set(trim(spec.substr(0, dot)), trim(spec.substr(dot + 1, eq - dot - 1)),
      trim(spec.substr(eq + 1)));
}

const std::string& RunConfig::str(const std::string& section,
                                  const std::string& key) const {
  auto sit = values_.find(section);
  if (sit == values_.end())
    throw std::invalid_argument("unknown config section [" + section + "]");
  auto kit = sit->second.find(key);
  if (kit == sit->second.end())
    throw std::invalid_argument("unknown config key " + section + "." + key);
  return kit->second;
}

int RunConfig::num(const std::string& section, const std::string& key) const {
  const std::string& v = str(section, key);
  size_t pos = 0;
  int out;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size())
    throw std::invalid_argument(section + "." + key + ": not an integer: " +
                                v);
  return out;
}

double RunConfig::real(const std::string& section,
                       const std::string& key) const {
  const std::string& v = str(section, key);
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = std::string::npos;
  }
  if (pos != v.size())
    throw std::invalid_argument(section + "." + key + ": not a number: " + v);
  return out;
}

bool RunConfig::flag(const std::string& section, const std::string& key) const {
  std::string v = str(section, key);
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument(section + "." + key + ": not a boolean: " + v);
}

uint64_t RunConfig::seed() const {
  return uint64_t(std::stoull(str("run", "seed")));
}

std::string RunConfig::snapshot() const {
  std::ostringstream out;
  bool first = true;
  for (const auto& [section, keys] : values_) {
    if (!first) out << "\n";
    first = false;
    out << "[" << section << "]\n";
    for (const auto& [key, value] : keys) out << key << " = " << value << "\n";
  }
  return out.str();
}

}  // namespace lomo::cli
