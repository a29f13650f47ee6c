#pragma once

#include "lomo/core/tensor.hpp"

namespace lomo::pipeline {

// Monotone per-channel quantile mapping: the k-th smallest pixel of each
// img channel takes the value of the k-th smallest pixel of the same ref
// channel, so the output's sorted values equal ref's exactly.
Tensor<float> histogram_match(const Tensor<float>& img,
                              const Tensor<float>& ref);

}  // namespace lomo::pipeline
