#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace lomo::cli {

// Sectioned key=value run configuration with a fixed schema: every key has
// a default, unknown sections or keys are rejected by name. The resolved
// state serializes back to the same format, so a run can be reproduced from
// the snapshot written next to its outputs.
class RunConfig {
 public:
  RunConfig();

  void apply_file(const std::string& path);
  void apply_text(const std::string& text, const std::string& origin);
  // "section.key=value" as passed to --set
  void apply_override(const std::string& spec);
  void set(const std::string& section, const std::string& key,
           const std::string& value);

  const std::string& str(const std::string& section,
                         const std::string& key) const;
  int num(const std::string& section, const std::string& key) const;
  double real(const std::string& section, const std::string& key) const;
  bool flag(const std::string& section, const std::string& key) const;
  uint64_t seed() const;

  std::string snapshot() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace lomo::cli
