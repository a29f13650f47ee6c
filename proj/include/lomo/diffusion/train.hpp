#pragma once

#include <vector>

#include "lomo/codec/codec.hpp"
#include "lomo/core/rng.hpp"
#include "lomo/diffusion/schedule.hpp"
#include "lomo/diffusion/unet.hpp"

namespace lomo::diffusion {

// One Monte Carlo draw of the noise-prediction objective: picks a timestep
// uniformly from [t_min, t_max), corrupts the clip to that level and scores
// the model's noise estimate by mean squared error. The restricted-window
// variants used during fine-tuning are this same function with a narrower
// range. Reports the drawn timestep so callers can audit the window.
template <typename T>
struct DrawnLoss {
  T value;
  int t;
};

template <typename T>
DrawnLoss<T> denoise_loss(Denoiser<T>& model, const Tensor<T>& z0, int cond,
                          int t_min, int t_max, const NoiseSchedule& s,
                          Rng& rng, bool accumulate_grads = false) {
  if (t_min < 0 || t_min >= t_max || t_max > s.T)
    throw std::invalid_argument(
        "denoise_loss: need 0 <= t_min < t_max <= T");
  const int t = rng.uniform_int(t_min, t_max);
  Tensor<T> eps(z0.shape());
  rng.fill_normal(eps.data(), eps.numel(), T(0), T(1));
  Tensor<T> zt = q_sample(z0, t, eps, s);
  Tensor<T> pred = model.forward(zt, t, cond);
  const int64_t n = pred.numel();
  T loss = 0;
  for (int64_t i = 0; i < n; ++i) {
    const T d = pred.data()[i] - eps.data()[i];
    loss += d * d;
  }
  loss /= T(n);
  if (accumulate_grads) {
    Tensor<T> gy(pred.shape());
    for (int64_t i = 0; i < n; ++i)
      gy.data()[i] = T(2) * (pred.data()[i] - eps.data()[i]) / T(n);
    model.backward(gy);
  }
  return {loss, t};
}

struct DiffusionTrainConfig {
  int iters = 3000;
  float lr = 5e-4f;
  int log_every = 50;
  int seed = 3;
};

struct DiffusionTrainStats {
  std::vector<float> loss_log;
  float initial_loss = 0;
  float final_loss = 0;
};

// Trains the base model on latent clips over the full timestep range.
// initial/final entries are trailing-window averages of the logged losses.
DiffusionTrainStats train_base(UNet<float>& net,
                               const std::vector<codec::LatentClip>& clips,
                               const NoiseSchedule& s,
                               const DiffusionTrainConfig& cfg);

}  // namespace lomo::diffusion
