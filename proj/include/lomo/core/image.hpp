#pragma once

#include <string>
#include <vector>

#include "lomo/core/tensor.hpp"

// RGB frames as float tensors shaped (3, H, W) with values in [0, 1].
namespace lomo::img {

Tensor<float> load_png(const std::string& path);
void save_png(const std::string& path, const Tensor<float>& rgb);

// Snap every channel value to the nearest k/255. Applied to frames at
// generation time so a save/load round trip is bit-exact.
Tensor<float> quantize8(const Tensor<float>& rgb);

// Tile frames left to right, top to bottom into one image on a white gutter.
Tensor<float> make_grid(const std::vector<Tensor<float>>& frames, int cols,
                        int pad = 2);

}  // namespace lomo::img
