#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lomo/core/tensor.hpp"

namespace lomo::diffusion {

// Linear-beta schedule; alpha_bars kept in double so late-timestep products
// stay accurate.
struct NoiseSchedule {
  int T = 0;
  std::vector<float> betas;
  std::vector<float> alphas;
  std::vector<double> alpha_bars;

  double alpha_bar(int t) const {
    if (t < 0 || t >= T)
      throw std::out_of_range("NoiseSchedule: t = " + std::to_string(t) +
                              " outside [0," + std::to_string(T) + ")");
    return alpha_bars[static_cast<size_t>(t)];
  }
};

NoiseSchedule make_schedule(int T = 1000, double beta_start = 1e-4,
                            double beta_end = 2e-2);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
template <typename T>
Tensor<T> q_sample(const Tensor<T>& z0, int t, const Tensor<T>& eps,
                   const NoiseSchedule& s) {
  if (!z0.same_shape(eps))
    throw std::invalid_argument("q_sample: eps shape " + eps.shape_str() +
                                " != z0 shape " + z0.shape_str());
  const double ab = s.alpha_bar(t);
  const T c0 = static_cast<T>(std::sqrt(ab));
  const T c1 = static_cast<T>(std::sqrt(1.0 - ab));
  Tensor<T> zt(z0.shape());
  for (int64_t i = 0; i < z0.numel(); ++i) zt[i] = c0 * z0[i] + c1 * eps[i];
  return zt;
}

}  // namespace lomo::diffusion
