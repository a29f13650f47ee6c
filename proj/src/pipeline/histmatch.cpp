#include "lomo/pipeline/histmatch.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace lomo::pipeline {

Tensor<float> histogram_match(const Tensor<float>& img,
                              const Tensor<float>& ref) {
  if (img.ndim() != 3 || ref.ndim() != 3 || img.shape() != ref.shape())
    throw std::invalid_argument("histogram_match: shape mismatch: " +
                                img.shape_str() + " vs " + ref.shape_str());
  const int C = img.dim(0);
  const int64_t n = int64_t(img.dim(1)) * img.dim(2);
  Tensor<float> out(img.shape());
  std::vector<int64_t> order(n);
  std::vector<float> sorted_ref(n);
  for (int c = 0; c < C; ++c) {
    const float* pi = img.data() + c * n;
    const float* pr = ref.data() + c * n;
    float* po = out.data() + c * n;
    std::iota(order.begin(), order.end(), int64_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [pi](int64_t a, int64_t b) { return pi[a] < pi[b]; });
    std::copy(pr, pr + n, sorted_ref.begin());
    std::sort(sorted_ref.begin(), sorted_ref.end());
    for (int64_t k = 0; k < n; ++k) po[order[k]] = sorted_ref[k];
  }
  return out;
}

}  // namespace lomo::pipeline
