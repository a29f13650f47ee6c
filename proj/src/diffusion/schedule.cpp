#include "lomo/diffusion/schedule.hpp"

namespace lomo::diffusion {

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 2)
    throw std::invalid_argument("make_schedule: T must be >= 2");
  if (!(beta_start > 0) || !(beta_start <= beta_end) || !(beta_end < 1))
    throw std::invalid_argument(
        "make_schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.betas.resize(static_cast<size_t>(T));
  s.alphas.resize(static_cast<size_t>(T));
  s.alpha_bars.resize(static_cast<size_t>(T));
  double bar = 1.0;
  for (int t = 0; t < T; ++t) {
    const double b =
        beta_start + (beta_end - beta_start) * static_cast<double>(t) /
                         static_cast<double>(T - 1);
    s.betas[static_cast<size_t>(t)] = static_cast<float>(b);
    s.alphas[static_cast<size_t>(t)] = static_cast<float>(1.0 - b);
    bar *= 1.0 - b;
    s.alpha_bars[static_cast<size_t>(t)] = bar;
  }
  return s;
}

}  // namespace lomo::diffusion
