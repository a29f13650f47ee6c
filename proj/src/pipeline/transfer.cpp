#include "lomo/pipeline/transfer.hpp"

#include <cmath>
#include <stdexcept>

#include "lomo/core/image.hpp"
#include "lomo/core/rng.hpp"

namespace lomo::pipeline {

TransferResult transfer(const synth::VideoClip& source,
                        const synth::VideoClip& driving,
                        const codec::Codec& codec, const flow::LOFNet& lofnet,
                        diffusion::UNet<float>& denoiser,
                        const diffusion::NoiseSchedule& s,
                        const TransferConfig& cfg) {
  if (cfg.t_inv < 0 || cfg.t_inv >= s.T)
    throw std::invalid_argument("transfer: t_inv must be in [0, T)");
  if (cfg.gamma < 0)
    throw std::invalid_argument("transfer: gamma must be >= 0");
  if (source.frames.empty() || driving.frames.empty())
    throw std::invalid_argument("transfer: empty clip");
  if (!source.has_keypoints() || !driving.has_keypoints())
    throw std::invalid_argument("transfer: both clips need keypoints");
  const int S = codec.size();
  if (source.frames[0].dim(1) != S || driving.frames[0].dim(1) != S)
    throw std::invalid_argument("transfer: clip size does not match codec");
  if (lofnet.grid() != codec.latent_size())
    throw std::invalid_argument("transfer: flow grid does not match codec");
  if (lofnet.keypoint_count() != source.keypoints[0].k())
    throw std::invalid_argument(
        "transfer: keypoint count does not match flow model");

  const int F = int(driving.frames.size());
  const int hw = codec.latent_size();
  const int cond =
      synth::class_id(synth::body_shape_from_string(source.label));

  // 1. source frame 0 -> latent
  Tensor<float> z_s0 = codec.encode(source.frames[0]);

  // 2. deterministic inversion of the frame-0 latent replicated across all
  //    F temporal slots, so temporal attention sees a consistent clip
  Tensor<float> clip0({F, z_s0.dim(0), hw, hw});
  for (int f = 0; f < F; ++f)
    std::copy(z_s0.data(), z_s0.data() + z_s0.numel(),
              clip0.data() + size_t(f) * z_s0.numel());
  Tensor<float> z_inv = diffusion::ddim_invert(std::move(clip0), cond,
                                               denoiser, s, cfg.steps,
                                               cfg.t_inv);

  // 3. driving motion re-expressed in the source's pose frame
  TransferResult res;
  res.adapted = flow::adapt_keypoints(source.keypoints[0], driving.keypoints);

  // 4. warp each inverted slot along the adapted motion; flows are predicted
  //    from the clean source latent, which is what the flow net trained on
  Tensor<float> z_warp({F, z_s0.dim(0), hw, hw});
  for (int f = 0; f < F; ++f) {
    auto fr = lofnet.predict(z_s0, source.keypoints[0], res.adapted[f]);
    Tensor<float> slot({z_s0.dim(0), hw, hw});
    std::copy(z_inv.data() + size_t(f) * z_s0.numel(),
              z_inv.data() + size_t(f + 1) * z_s0.numel(), slot.data());
    Tensor<float> w = flow::warp(slot, fr.flow);
    std::copy(w.data(), w.data() + w.numel(),
              z_warp.data() + size_t(f) * z_s0.numel());
    res.flows.push_back(std::move(fr.flow));
  }

  // 5. extra noise for diversity, scaled to the inversion depth
  Rng rng(cfg.seed);
  const float amp = cfg.gamma * float(std::sqrt(1.0 - s.alpha_bar(cfg.t_inv)));
  if (amp > 0) {
    Tensor<float> noise(z_warp.shape());
    rng.fill_normal(noise.data(), noise.numel(), 0.0f, 1.0f);
    for (int64_t i = 0; i < z_warp.numel(); ++i)
      z_warp.data()[i] += amp * noise.data()[i];
  }
  res.warped_noisy = z_warp;

  // 6. denoise from the inversion depth with the adapted model
  Tensor<float> z_out = diffusion::ddim_sample(std::move(z_warp), cond,
                                               denoiser, s, cfg.steps,
                                               cfg.t_inv);

  // 7.-8. decode, then color-correct against the source reconstruction
  Tensor<float> rgb = codec.decode(z_out);
  Tensor<float> ref = codec.decode(z_s0);
  res.output.fps = driving.fps;
  res.output.label = source.label;
  res.output.preset_name = driving.preset_name;
  res.output.keypoints = res.adapted;
  for (int f = 0; f < F; ++f) {
    Tensor<float> frame({3, S, S});
    std::copy(rgb.data() + size_t(f) * frame.numel(),
              rgb.data() + size_t(f + 1) * frame.numel(), frame.data());
    if (cfg.hist_match) frame = histogram_match(frame, ref);
    res.output.frames.push_back(img::quantize8(frame));
  }
  return res;
}

TransferResult single_frame_transfer(const synth::VideoClip& source_frame,
                                     const synth::VideoClip& driving,
                                     const codec::Codec& codec,
                                     const flow::LOFNet& lofnet,
                                     diffusion::UNet<float>& denoiser,
                                     const diffusion::NoiseSchedule& s,
                                     const TransferConfig& cfg) {
  if (source_frame.frames.size() != 1)
    throw std::invalid_argument(
        "single_frame_transfer: source must have exactly one frame");
  TransferResult res = transfer(source_frame, driving, codec, lofnet,
                                denoiser, s, cfg);
  res.single_frame = true;
  return res;
}

}  // namespace lomo::pipeline
