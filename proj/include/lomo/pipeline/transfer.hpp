#pragma once

#include <vector>

#include "lomo/codec/codec.hpp"
#include "lomo/diffusion/ddim.hpp"
#include "lomo/flow/lofnet.hpp"
#include "lomo/pipeline/histmatch.hpp"
#include "lomo/synth/sprite.hpp"

namespace lomo::pipeline {

struct TransferConfig {
  int t_inv = 980;
  int steps = 50;
  float gamma = 0.1f;     // extra-noise strength on the warped inversion
  uint64_t seed = 11;
  bool hist_match = true;
};

struct TransferResult {
  synth::VideoClip output;  // keypoints = adapted driving keypoints
  std::vector<synth::KeypointSet> adapted;
  std::vector<flow::DenseFlow> flows;
  Tensor<float> warped_noisy;  // (F,4,h,w) state fed to the sampler
  bool single_frame = false;
};

// Full inference path: encode source frame 0, invert it (replicated across
// the driving clip's frame slots), warp each slot along the adapted driving
// motion, perturb with gamma-scaled noise, denoise with the adapted model,
// decode and color-correct against the decoded source frame.
// Deterministic given (inputs, models, cfg.seed).
TransferResult transfer(const synth::VideoClip& source,
                        const synth::VideoClip& driving,
                        const codec::Codec& codec, const flow::LOFNet& lofnet,
                        diffusion::UNet<float>& denoiser,
                        const diffusion::NoiseSchedule& s,
                        const TransferConfig& cfg);

// Same path for a one-frame source; the result is flagged so downstream
// reporting can tell the two input modes apart.
TransferResult single_frame_transfer(const synth::VideoClip& source_frame,
                                     const synth::VideoClip& driving,
                                     const codec::Codec& codec,
                                     const flow::LOFNet& lofnet,
                                     diffusion::UNet<float>& denoiser,
                                     const diffusion::NoiseSchedule& s,
                                     const TransferConfig& cfg);

}  // namespace lomo::pipeline
