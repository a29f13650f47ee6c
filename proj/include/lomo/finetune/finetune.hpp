#pragma once

#include <vector>

#include "lomo/codec/codec.hpp"
#include "lomo/diffusion/train.hpp"
#include "lomo/finetune/lora.hpp"
#include "lomo/flow/lofnet.hpp"

namespace lomo::finetune {

// Latent clip assembled by warping the source's frame-0 latent along the
// adapted driving motion. Reads go through get() so a run that claims not to
// use the warp branch can be audited.
struct WarpedClip {
  Tensor<float> latents;  // (F,4,h,w)
  mutable int64_t reads = 0;

  int frames() const { return latents.ndim() == 4 ? latents.dim(0) : 0; }
  const Tensor<float>& get() const {
    ++reads;
    return latents;
  }
};

// For each driving frame: adapt the driving keypoints into the source's
// pose frame, predict a dense flow against the source frame-0 keypoints and
// warp the source frame-0 latent by it.
WarpedClip build_warped_clip(const flow::LOFNet& lofnet,
                             const Tensor<float>& z_src_frame0,
                             const synth::KeypointSet& kp_src_frame0,
                             const std::vector<synth::KeypointSet>& kp_drv_seq);

// Which timestep window the warp branch trains on. The main method uses
// w850_1000 (w900_1000 for glyph sprites); the other settings exist for the
// ablation grid, with none disabling the branch entirely.
enum class WarpWindow { w850_1000, w900_1000, w0_1000, w400_1000, w800_1000, none };

struct FinetuneConfig {
  int rank = 4;
  float alpha = 4.0f;
  int iterations = 250;
  float lr = 5e-4f;
  int t_source_min = 0;
  int t_source_max = 1000;
  WarpWindow warp_window = WarpWindow::w850_1000;
  uint64_t seed = 7;
};

// [t_min, t_max) for a window under schedule length T; none has no range.
std::pair<int, int> warp_window_range(WarpWindow w, int T);
const char* to_string(WarpWindow w);
WarpWindow warp_window_from_string(const std::string& s);

struct FinetuneStats {
  std::vector<float> loss_source;  // per iteration
  std::vector<float> loss_warp;    // per iteration, empty when window none
  std::vector<int> warp_draws;     // every t drawn for the warp branch
};

// LoRA adaptation of the denoiser on (source clip, warped clip). Attaches
// adapters, freezes the base and runs cfg.iterations Adam steps on the sum
// of the two noise-prediction losses. Asserts on every step that only
// adapter parameters carry gradient and that each warp-branch timestep lies
// inside the configured window.
FinetuneStats finetune(diffusion::UNet<float>& net,
                       const codec::LatentClip& z_src_clip,
                       const WarpedClip& warped, int cond,
                       const diffusion::NoiseSchedule& s,
                       const FinetuneConfig& cfg);

}  // namespace lomo::finetune
