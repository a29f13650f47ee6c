#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lomo/cli/config.hpp"

namespace lomo::cli {

struct CommandOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // section.key=value
  std::optional<uint64_t> seed;
  std::string out;  // overrides [run].out when non-empty
  bool ablation = false;
};

// Builds the effective config: defaults, then the file, then --set
// overrides, then --seed/--out.
RunConfig resolve_config(const CommandOptions& opts);

int cmd_gen_data(const RunConfig& cfg);
int cmd_train_codec(const RunConfig& cfg);
int cmd_train_lofnet(const RunConfig& cfg);
int cmd_train_diffusion(const RunConfig& cfg);
int cmd_finetune(const RunConfig& cfg);
int cmd_transfer(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg, bool ablation);

// Dispatches by command name; exceptions become a one-line diagnostic on
// stderr and a nonzero exit code.
int run_command(const std::string& name, const CommandOptions& opts);

}  // namespace lomo::cli
