#include "lomo/core/gif.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace lomo::gifio {
namespace {

// 252-entry color cube (6 red x 7 green x 6 blue levels) + 4 greys.
void build_palette(uint8_t pal[256][3]) {
  for (int r = 0; r < 6; ++r)
    for (int g = 0; g < 7; ++g)
      for (int b = 0; b < 6; ++b) {
        int idx = (r * 7 + g) * 6 + b;
        pal[idx][0] = static_cast<uint8_t>(std::lround(255.0 * r / 5.0));
        pal[idx][1] = static_cast<uint8_t>(std::lround(255.0 * g / 6.0));
        pal[idx][2] = static_cast<uint8_t>(std::lround(255.0 * b / 5.0));
      }
  const uint8_t greys[4] = {32, 96, 160, 224};
  for (int i = 0; i < 4; ++i)
    pal[252 + i][0] = pal[252 + i][1] = pal[252 + i][2] = greys[i];
}

uint8_t map_index(float rf, float gf, float bf) {
  int r = static_cast<int>(std::lround(std::clamp(rf, 0.0f, 1.0f) * 5.0f));
  int g = static_cast<int>(std::lround(std::clamp(gf, 0.0f, 1.0f) * 6.0f));
  int b = static_cast<int>(std::lround(std::clamp(bf, 0.0f, 1.0f) * 5.0f));
  return static_cast<uint8_t>((r * 7 + g) * 6 + b);
}

class LzwEncoder {
 public:
  explicit LzwEncoder(int min_code_size)
      : min_bits_(min_code_size),
        clear_(1 << min_code_size),
        eoi_(clear_ + 1) {
    reset_dict();
  }

  std::vector<uint8_t> encode(const std::vector<uint8_t>& pixels) {
    out_.clear();
    bitbuf_ = 0;
    bitcnt_ = 0;
    put(clear_);
    int prefix = pixels.at(0);
    for (size_t i = 1; i < pixels.size(); ++i) {
      const int k = pixels[i];
      const uint32_t key = (static_cast<uint32_t>(prefix) << 8) | k;
      auto it = dict_.find(key);
      if (it != dict_.end()) {
        prefix = it->second;
        continue;
      }
      put(prefix);
      if (next_code_ >= 4095) {
        put(clear_);
        reset_dict();
      } else {
        dict_.emplace(key, next_code_++);
      }
      prefix = k;
    }
    put(prefix);
    put(eoi_);
    if (bitcnt_ > 0) out_.push_back(static_cast<uint8_t>(bitbuf_ & 0xff));
    return out_;
  }

 private:
  void reset_dict() {
    dict_.clear();
    next_code_ = eoi_ + 1;
    bits_ = min_bits_ + 1;
  }

  void put(int code) {
    bitbuf_ |= static_cast<uint32_t>(code) << bitcnt_;
    bitcnt_ += bits_;
    while (bitcnt_ >= 8) {
      out_.push_back(static_cast<uint8_t>(bitbuf_ & 0xff));
      bitbuf_ >>= 8;
      bitcnt_ -= 8;
    }
    if (next_code_ >= (1 << bits_) && bits_ < 12) ++bits_;
  }

  int min_bits_, clear_, eoi_;
  int bits_ = 0, next_code_ = 0;
  uint32_t bitbuf_ = 0;
  int bitcnt_ = 0;
  std::unordered_map<uint32_t, int> dict_;
  std::vector<uint8_t> out_;
};

void put_u16(std::ofstream& f, uint16_t v) {
  f.put(static_cast<char>(v & 0xff));
  f.put(static_cast<char>(v >> 8));
}

void put_blocks(std::ofstream& f, const std::vector<uint8_t>& bytes) {
  size_t i = 0;
  while (i < bytes.size()) {
    const size_t n = std::min<size_t>(255, bytes.size() - i);
    f.put(static_cast<char>(n));
    f.write(reinterpret_cast<const char*>(bytes.data() + i),
            static_cast<std::streamsize>(n));
    i += n;
  }
  f.put(0);
}

}  // namespace

void write_gif(const std::string& path,
               const std::vector<Tensor<float>>& frames, int delay_cs) {
  if (frames.empty()) throw std::runtime_error("write_gif: no frames");
  const int H = frames[0].dim(1);
  const int W = frames[0].dim(2);
  for (const auto& fr : frames)
    if (fr.ndim() != 3 || fr.dim(0) != 3 || fr.dim(1) != H || fr.dim(2) != W)
      throw std::runtime_error("write_gif: frame shape mismatch");

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);

  f.write("GIF89a", 6);
  put_u16(f, static_cast<uint16_t>(W));
  put_u16(f, static_cast<uint16_t>(H));
  f.put(static_cast<char>(0xF7));  // global table, 256 entries, 8-bit color
  f.put(0);                        // background index
  f.put(0);                        // aspect

  uint8_t pal[256][3];
  build_palette(pal);
  f.write(reinterpret_cast<const char*>(pal), sizeof(pal));

  // Application extension: loop forever.
  f.put(0x21);
  f.put(static_cast<char>(0xFF));
  f.put(11);
  f.write("NETSCAPE2.0", 11);
  f.put(3);
  f.put(1);
  put_u16(f, 0);
  f.put(0);

  std::vector<uint8_t> idx(static_cast<size_t>(H) * W);
  for (const auto& fr : frames) {
    f.put(0x21);
    f.put(static_cast<char>(0xF9));
    f.put(4);
    f.put(0x04);  // disposal: leave in place
    put_u16(f, static_cast<uint16_t>(delay_cs));
    f.put(0);
    f.put(0);

    f.put(0x2C);
    put_u16(f, 0);
    put_u16(f, 0);
    put_u16(f, static_cast<uint16_t>(W));
    put_u16(f, static_cast<uint16_t>(H));
    f.put(0);  // no local table

    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        idx[static_cast<size_t>(y) * W + x] =
            map_index(fr.at(0, y, x), fr.at(1, y, x), fr.at(2, y, x));

    f.put(8);  // LZW minimum code size
    LzwEncoder enc(8);
    put_blocks(f, enc.encode(idx));
  }

  f.put(0x3B);
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace lomo::gifio
