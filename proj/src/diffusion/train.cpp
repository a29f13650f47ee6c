#include "lomo/diffusion/train.hpp"

#include <stdexcept>

#include "lomo/nn/adam.hpp"
#include "lomo/synth/sprite.hpp"

namespace lomo::diffusion {

DiffusionTrainStats train_base(UNet<float>& net,
                               const std::vector<codec::LatentClip>& clips,
                               const NoiseSchedule& s,
                               const DiffusionTrainConfig& cfg) {
  if (clips.empty())
    throw std::invalid_argument("train_base: no clips");
  std::vector<int> cond_ids;
  cond_ids.reserve(clips.size());
  for (const auto& c : clips) {
    c.validate();
    cond_ids.push_back(
        synth::class_id(synth::body_shape_from_string(c.label)));
  }

  Rng rng(cfg.seed);
  nn::AdamOpt<float> opt(cfg.lr);
  DiffusionTrainStats stats;
  double window = 0;
  int window_n = 0;
  for (int it = 0; it < cfg.iters; ++it) {
    const int ci = rng.uniform_int(0, int(clips.size()));
    net.params().zero_grad();
    auto drawn = denoise_loss<float>(net, clips[ci].latents, cond_ids[ci], 0,
                                     s.T, s, rng, true);
    opt.step(net.params());
    window += drawn.value;
    ++window_n;
    if ((it + 1) % cfg.log_every == 0 || it + 1 == cfg.iters) {
      stats.loss_log.push_back(float(window / window_n));
      window = 0;
      window_n = 0;
    }
  }
  if (!stats.loss_log.empty()) {
    stats.initial_loss = stats.loss_log.front();
    stats.final_loss = stats.loss_log.back();
  }
  return stats;
}

}  // namespace lomo::diffusion
