#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lomo/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"latent motion transfer pipeline"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    lomo::cli::CommandOptions opts;
    std::string name;
  };
  std::vector<Sub> subs;
  const std::vector<std::pair<std::string, std::string>> names = {
      {"gen-data", "generate the synthetic sprite dataset"},
      {"train-codec", "train the RGB <-> latent autoencoder"},
      {"train-lofnet", "precompute latents and train the flow predictor"},
      {"train-diffusion", "train the base latent video denoiser"},
      {"finetune", "LoRA-adapt the denoiser to a (source, driving) pair"},
      {"transfer", "run motion transfer and write a run directory"},
      {"eval", "score one or more runs; --ablation prints a variant table"},
  };
  subs.reserve(names.size());
  for (const auto& [name, help] : names) {
    subs.push_back({app.add_subcommand(name, help), {}, name});
    Sub& s = subs.back();
    s.cmd->add_option("--config", s.opts.config_path,
                      "config file (sectioned key = value)");
    s.cmd->add_option("--set", s.opts.overrides,
                      "override, e.g. --set transfer.steps=25");
    s.cmd->add_option("--seed", s.opts.seed, "global seed override");
    s.cmd->add_option("--out", s.opts.out, "output directory override");
    if (name == "eval")
      s.cmd->add_flag("--ablation", s.opts.ablation,
                      "format results as the ablation variant table");
  }

  CLI11_PARSE(app, argc, argv);

  for (const Sub& s : subs)
    if (s.cmd->parsed()) return lomo::cli::run_command(s.name, s.opts);
  return 2;
}
