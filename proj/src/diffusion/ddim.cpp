#include "lomo/diffusion/ddim.hpp"

#include <algorithm>

namespace lomo::diffusion {

std::vector<int> ddim_time_grid(int t_start, int steps) {
  if (t_start < 0) throw std::invalid_argument("ddim_time_grid: t_start < 0");
  if (steps < 1) throw std::invalid_argument("ddim_time_grid: steps < 1");
  std::vector<int> times;
  times.reserve(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    const int t =
        int(std::lround(double(t_start) * (1.0 - double(i) / steps)));
    if (times.empty() || times.back() != t) times.push_back(t);
  }
  return times;
}

}  // namespace lomo::diffusion
