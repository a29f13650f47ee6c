#pragma once

#include <string>
#include <vector>

#include "lomo/core/tensor.hpp"

namespace lomo::gifio {

// Animated GIF89a with an infinite loop. Frames are (3,H,W) floats in [0,1],
// mapped onto a fixed 6x7x6 color cube plus four greys and LZW-compressed.
void write_gif(const std::string& path,
               const std::vector<Tensor<float>>& frames, int delay_cs = 8);

}  // namespace lomo::gifio
