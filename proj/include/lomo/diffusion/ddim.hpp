#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lomo/diffusion/schedule.hpp"
#include "lomo/diffusion/unet.hpp"

namespace lomo::diffusion {

// Timestep grid for a deterministic sampler run: steps+1 values spaced
// evenly from t_start down to 0, rounded to integers, with consecutive
// duplicates merged. Always starts at t_start and ends at 0.
std::vector<int> ddim_time_grid(int t_start, int steps);

namespace detail {

// Shared deterministic update between two noise levels. Moving to lower
// noise (a_to > a_from) denoises; the reverse direction inverts.
template <typename T>
Tensor<T> ddim_transition(const Tensor<T>& z, double a_from, double a_to,
                          const Tensor<T>& eps) {
  if (z.shape() != eps.shape())
    throw std::invalid_argument("ddim: noise estimate shape mismatch: " +
                                z.shape_str() + " vs " + eps.shape_str());
  const double c1 = std::sqrt(a_to / a_from);
  const double c2 = std::sqrt(1.0 - a_to) - c1 * std::sqrt(1.0 - a_from);
  Tensor<T> out(z.shape());
  for (int64_t i = 0; i < z.numel(); ++i)
    out.data()[i] = T(c1 * double(z.data()[i]) + c2 * double(eps.data()[i]));
  return out;
}

}  // namespace detail

// One deterministic update from timestep t to the earlier timestep t_prev.
template <typename T>
Tensor<T> ddim_step(const Tensor<T>& z, int t, int t_prev,
                    const Tensor<T>& eps, const NoiseSchedule& s) {
  if (t_prev >= t)
    throw std::invalid_argument("ddim_step: t_prev must be < t");
  return detail::ddim_transition(z, s.alpha_bar(t), s.alpha_bar(t_prev), eps);
}

// Runs the denoiser down the time grid from t_start (default T-1) to 0.
template <typename T>
Tensor<T> ddim_sample(Tensor<T> z, int cond, Denoiser<T>& model,
                      const NoiseSchedule& s, int steps, int t_start = -1) {
  if (t_start < 0) t_start = s.T - 1;
  if (t_start > s.T - 1)
    throw std::invalid_argument("ddim_sample: t_start exceeds schedule");
  if (steps < 1 || steps > s.T)
    throw std::invalid_argument("ddim_sample: steps must be in [1, T]");
  const std::vector<int> times = ddim_time_grid(t_start, steps);
  for (size_t i = 0; i + 1 < times.size(); ++i) {
    Tensor<T> eps = model.forward(z, times[i], cond);
    z = ddim_step(z, times[i], times[i + 1], eps, s);
  }
  return z;
}

// Walks the same grid upward from 0 to t_target, reusing the transition
// formula in reverse. The noise estimate for each hop is evaluated at the
// hop's destination timestep.
template <typename T>
Tensor<T> ddim_invert(Tensor<T> z0, int cond, Denoiser<T>& model,
                      const NoiseSchedule& s, int steps, int t_target) {
  if (t_target < 0 || t_target > s.T - 1)
    throw std::invalid_argument("ddim_invert: t_target must be in [0, T-1]");
  if (steps < 1 || steps > s.T)
    throw std::invalid_argument("ddim_invert: steps must be in [1, T]");
  std::vector<int> times = ddim_time_grid(t_target, steps);
  std::reverse(times.begin(), times.end());
  for (size_t i = 0; i + 1 < times.size(); ++i) {
    const int cur = times[i], next = times[i + 1];
    Tensor<T> eps = model.forward(z0, next, cond);
    z0 = detail::ddim_transition(z0, s.alpha_bar(cur), s.alpha_bar(next), eps);
  }
  return z0;
}

}  // namespace lomo::diffusion
