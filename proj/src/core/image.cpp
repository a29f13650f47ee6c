#include "lomo/core/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace lomo::img {

Tensor<float> load_png(const std::string& path) {
  png_image im;
  std::memset(&im, 0, sizeof(im));
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&im, path.c_str()))
    throw std::runtime_error("cannot read png: " + path + ": " + im.message);
  im.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(im));
  if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&im);
    throw std::runtime_error("cannot decode png: " + path + ": " + im.message);
  }
  const int H = static_cast<int>(im.height);
  const int W = static_cast<int>(im.width);
  Tensor<float> out({3, H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const unsigned char* p = &buf[(static_cast<size_t>(y) * W + x) * 3];
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = p[c] / 255.0f;
    }
  return out;
}

void save_png(const std::string& path, const Tensor<float>& rgb) {
  if (rgb.ndim() != 3 || rgb.dim(0) != 3)
    throw std::runtime_error("save_png expects a (3,H,W) tensor, got " + rgb.shape_str());
  const int H = rgb.dim(1);
  const int W = rgb.dim(2);
  std::vector<unsigned char> buf(static_cast<size_t>(H) * W * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = std::clamp(rgb.at(c, y, x), 0.0f, 1.0f);
        buf[(static_cast<size_t>(y) * W + x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
  png_image im;
  std::memset(&im, 0, sizeof(im));
  im.version = PNG_IMAGE_VERSION;
  im.width = static_cast<png_uint_32>(W);
  im.height = static_cast<png_uint_32>(H);
  im.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&im, path.c_str(), 0, buf.data(), 0, nullptr))
    throw std::runtime_error("cannot write png: " + path + ": " + im.message);
}

Tensor<float> quantize8(const Tensor<float>& rgb) {
  Tensor<float> out = rgb.clone();
  for (int64_t i = 0; i < out.numel(); ++i) {
    float v = std::clamp(out[i], 0.0f, 1.0f);
    out[i] = static_cast<float>(std::lround(v * 255.0f)) / 255.0f;
  }
  return out;
}

Tensor<float> make_grid(const std::vector<Tensor<float>>& frames, int cols,
                        int pad) {
  if (frames.empty()) throw std::runtime_error("make_grid: no frames");
  const int H = frames[0].dim(1);
  const int W = frames[0].dim(2);
  const int n = static_cast<int>(frames.size());
  const int rows = (n + cols - 1) / cols;
  const int GH = rows * H + (rows + 1) * pad;
  const int GW = cols * W + (cols + 1) * pad;
  Tensor<float> grid({3, GH, GW});
  grid.fill(1.0f);
  for (int i = 0; i < n; ++i) {
    const int r = i / cols;
    const int cc = i % cols;
    const int y0 = pad + r * (H + pad);
    const int x0 = pad + cc * (W + pad);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          grid.at(c, y0 + y, x0 + x) = frames[i].at(c, y, x);
  }
  return grid;
}

}  // namespace lomo::img
