#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lomo/diffusion/unet.hpp"

namespace lomo::finetune {

// Adds rank-r adapters to every attention projection (spatial, cross and
// temporal) and freezes everything else, so an optimizer pass over the
// parameter set can only move the adapter factors.
void attach_lora(diffusion::UNet<float>& net, int rank, float alpha, Rng& rng);

bool is_lora_param(const std::string& name);
std::vector<std::string> lora_param_names(const nn::ParamSet<float>& ps);

// FNV-1a over the frozen weights (names + payloads, adapter params skipped).
// Ties an adapter checkpoint to the exact base it was trained on.
uint64_t base_fingerprint(const nn::ParamSet<float>& ps);

// Adapter checkpoints hold only the A/B factors plus enough metadata to
// re-attach: rank, alpha, target layer names and the base fingerprint.
void save_adapter(const diffusion::UNet<float>& net, int rank, float alpha,
                  const nlohmann::json& extra_meta, const std::string& path);

// Attaches (if needed) and fills the adapter; refuses a checkpoint whose
// base fingerprint or target layout disagrees with this net.
nlohmann::json load_adapter(diffusion::UNet<float>& net,
                            const std::string& path);

}  // namespace lomo::finetune
