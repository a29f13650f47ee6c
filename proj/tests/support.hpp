#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "lomo/core/rng.hpp"
#include "lomo/core/tensor.hpp"
#include "lomo/nn/params.hpp"

namespace testutil {

inline double max_abs_diff(const lomo::Tensor<float>& a,
                           const lomo::Tensor<float>& b) {
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(double(a.data()[i]) - b.data()[i]));
  return m;
}

inline double max_abs_diff(const lomo::Tensor<double>& a,
                           const lomo::Tensor<double>& b) {
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline bool bitwise_equal(const lomo::Tensor<float>& a,
                          const lomo::Tensor<float>& b) {
  if (a.shape() != b.shape()) return false;
  for (int64_t i = 0; i < a.numel(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

template <typename T>
void fill_random(lomo::Tensor<T>& t, lomo::Rng& rng, T lo = T(-1),
                 T hi = T(1)) {
  rng.fill_uniform(t.data(), t.numel(), lo, hi);
}

// Central finite differences against the gradients a backward pass left in
// the set. loss_fwd must re-run the same forward computation (no grads) and
// return the scalar loss. Samples coords from every parameter.
template <typename LossFwd>
double max_param_grad_rel_err(lomo::nn::ParamSet<double>& ps,
                              LossFwd&& loss_fwd, lomo::Rng& rng,
                              int coords_per_param = 3, double h = 1e-5) {
  double worst = 0;
  for (auto* p : ps.items()) {
    if (!p->trainable) continue;
    for (int c = 0; c < coords_per_param; ++c) {
      const int64_t i = rng.uniform_int(0, int(p->w.numel()));
      const double keep = p->w.data()[i];
      p->w.data()[i] = keep + h;
      const double lp = loss_fwd();
      p->w.data()[i] = keep - h;
      const double lm = loss_fwd();
      p->w.data()[i] = keep;
      const double fd = (lp - lm) / (2 * h);
      const double an = p->g.data()[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  }
  return worst;
}

// Unique scratch directory under the build tree for filesystem tests.
inline std::string scratch_dir(const std::string& tag) {
  const auto dir =
      std::filesystem::temp_directory_path() / ("lomo_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace testutil
