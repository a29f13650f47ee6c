#pragma once

#include <string>
#include <vector>

#include "lomo/core/rng.hpp"
#include "lomo/nn/layers.hpp"
#include "lomo/synth/sprite.hpp"

// Convolutional autoencoder between RGB frames and 4-channel latents at 1/8
// spatial resolution. encode/decode are cache-free const paths (safe for
// concurrent callers); forward/backward is the cached training path.
namespace lomo::codec {

inline constexpr int kLatentChannels = 4;
inline constexpr int kDownFactor = 8;

struct CodecConfig {
  int size = 64;
  int epochs = 18;
  int batch = 16;
  float lr = 2e-3f;
  float holdout_frac = 0.1f;
  uint64_t seed = 1;
};

class Codec {
 public:
  explicit Codec(int size = 64);
  explicit Codec(const std::string& checkpoint_path);
  Codec(const Codec&) = delete;
  Codec& operator=(const Codec&) = delete;

  int size() const { return size_; }
  int latent_size() const { return size_ / kDownFactor; }

  void init(Rng& rng);
  nn::ParamSet<float>& params() { return params_; }

  // (3,S,S) -> (4,s,s) or (B,3,S,S) -> (B,4,s,s); values in (-1,1).
  Tensor<float> encode(const Tensor<float>& rgb) const;
  // (4,s,s) -> (3,S,S) or batched; values in (0,1).
  Tensor<float> decode(const Tensor<float>& z) const;

  Tensor<float> forward(const Tensor<float>& rgb);  // (B,3,S,S) autoencode
  void backward(const Tensor<float>& gy);

  void save(const std::string& path) const;

 private:
  int size_;
  nn::Conv2d<float> e1_, e2_, e3_, e4_;
  nn::GroupNorm<float> en1_, en2_, en3_;
  nn::Conv2d<float> d1_, d2_, d3_, d4_, d5_;
  nn::GroupNorm<float> dn1_, dn2_, dn3_, dn4_;
  nn::SiLU<float> ea1_, ea2_, ea3_, da1_, da2_, da3_, da4_;
  nn::Upsample2x<float> up1_, up2_, up3_;
  nn::Tanh<float> tanh_;
  nn::Sigmoid<float> sig_;
  nn::ParamSet<float> params_;
};

struct CodecTrainStats {
  std::vector<float> loss;  // one entry per optimizer step
  float untrained_holdout_mse = 0;
  float holdout_mse = 0;
  float holdout_psnr = 0;
};

CodecTrainStats train_codec(Codec& codec,
                            const std::vector<synth::VideoClip>& dataset,
                            const CodecConfig& cfg);

Tensor<float> encode_clip(const Codec& codec, const synth::VideoClip& clip);

// A clip in latent space, keeping the oracle keypoints alongside.
struct LatentClip {
  Tensor<float> latents;  // (F,4,h,w), h = w = source_size/8
  int source_size = 0;
  std::vector<synth::KeypointSet> keypoints;
  std::string label;
  std::string preset_name;

  int frames() const { return latents.ndim() ? latents.dim(0) : 0; }
  Tensor<float> frame(int f) const;  // (4,h,w) copy
  void validate() const;
};

LatentClip make_latent_clip(const Codec& codec, const synth::VideoClip& clip);

void save_latent_dataset(const std::string& path,
                         const std::vector<LatentClip>& clips);
std::vector<LatentClip> load_latent_dataset(const std::string& path);

float mse(const Tensor<float>& a, const Tensor<float>& b);
float psnr(const Tensor<float>& a, const Tensor<float>& b);  // peak 1.0

}  // namespace lomo::codec
