#include "lomo/codec/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lomo/core/serialize.hpp"
#include "lomo/nn/adam.hpp"
#include "lomo/synth/clipio.hpp"

namespace lomo::codec {
namespace {

Tensor<float> silu_of(const Tensor<float>& x) {
  Tensor<float> y(x.shape());
  kern::Kern<float>::silu(x.data(), y.data(), static_cast<size_t>(x.numel()));
  return y;
}

void check_finite(const Tensor<float>& t, const char* who) {
  if (!all_finite(t))
    throw std::invalid_argument(std::string(who) +
                                ": input contains non-finite values");
}

int checkpoint_size(const std::string& path) {
  ser::Container c = ser::load(path);
  if (c.meta.value("kind", std::string()) != "codec")
    throw std::runtime_error("not a codec checkpoint: " + path);
  return c.meta.at("size").get<int>();
}

}  // namespace

Codec::Codec(int size)
    : size_(size),
      e1_("codec.e1", 3, 24, 3, 2),
      e2_("codec.e2", 24, 48, 3, 2),
      e3_("codec.e3", 48, 64, 3, 2),
      e4_("codec.e4", 64, kLatentChannels, 3),
      en1_("codec.en1", 8, 24),
      en2_("codec.en2", 8, 48),
      en3_("codec.en3", 8, 64),
      d1_("codec.d1", kLatentChannels, 64, 3),
      d2_("codec.d2", 64, 48, 3),
      d3_("codec.d3", 48, 24, 3),
      d4_("codec.d4", 24, 16, 3),
      d5_("codec.d5", 16, 3, 3),
      dn1_("codec.dn1", 8, 64),
      dn2_("codec.dn2", 8, 48),
      dn3_("codec.dn3", 8, 24),
      dn4_("codec.dn4", 8, 16) {
  if (size_ <= 0 || size_ % kDownFactor != 0)
    throw std::invalid_argument("Codec: size must be a positive multiple of 8");
  e1_.collect(params_);
  en1_.collect(params_);
  e2_.collect(params_);
  en2_.collect(params_);
  e3_.collect(params_);
  en3_.collect(params_);
  e4_.collect(params_);
  d1_.collect(params_);
  dn1_.collect(params_);
  d2_.collect(params_);
  dn2_.collect(params_);
  d3_.collect(params_);
  dn3_.collect(params_);
  d4_.collect(params_);
  dn4_.collect(params_);
  d5_.collect(params_);
}

Codec::Codec(const std::string& checkpoint_path)
    : Codec(checkpoint_size(checkpoint_path)) {
  ser::Container c = ser::load(checkpoint_path);
  const int ls = c.meta.value("latent_size", -1);
  const int ch = c.meta.value("latent_channels", -1);
  if (ls != latent_size() || ch != kLatentChannels)
    throw std::runtime_error("codec checkpoint " + checkpoint_path +
                             " violates the x8/4-channel contract");
  nn::unpack(c, params_);
}

void Codec::init(Rng& rng) {
  e1_.init(rng);
  e2_.init(rng);
  e3_.init(rng);
  e4_.init(rng);
  d1_.init(rng);
  d2_.init(rng);
  d3_.init(rng);
  d4_.init(rng);
  d5_.init(rng);
}

Tensor<float> Codec::encode(const Tensor<float>& rgb) const {
  check_finite(rgb, "encode");
  const bool batched = rgb.ndim() == 4;
  if (!(batched || rgb.ndim() == 3))
    throw std::invalid_argument("encode: expected (3,S,S) or (B,3,S,S), got " +
                                rgb.shape_str());
  Tensor<float> x = batched ? rgb : rgb.reshaped({1, 3, size_, size_});
  if (x.dim(1) != 3 || x.dim(2) != size_ || x.dim(3) != size_)
    throw std::invalid_argument("encode: frame must be 3x" +
                                std::to_string(size_) + "x" +
                                std::to_string(size_) + ", got " +
                                rgb.shape_str());
  Tensor<float> h = silu_of(en1_.apply(e1_.apply(x)));
  h = silu_of(en2_.apply(e2_.apply(h)));
  h = silu_of(en3_.apply(e3_.apply(h)));
  Tensor<float> z = nn::Tanh<float>::apply(e4_.apply(h));
  if (!batched)
    return z.reshaped({kLatentChannels, latent_size(), latent_size()});
  return z;
}

Tensor<float> Codec::decode(const Tensor<float>& z) const {
  check_finite(z, "decode");
  const int s = latent_size();
  const bool batched = z.ndim() == 4;
  if (!(batched || z.ndim() == 3))
    throw std::invalid_argument("decode: expected (4,s,s) or (B,4,s,s), got " +
                                z.shape_str());
  Tensor<float> x =
      batched ? z : z.reshaped({1, kLatentChannels, s, s});
  if (x.dim(1) != kLatentChannels || x.dim(2) != s || x.dim(3) != s)
    throw std::invalid_argument("decode: latent must be 4x" +
                                std::to_string(s) + "x" + std::to_string(s) +
                                ", got " + z.shape_str());
  Tensor<float> h = silu_of(dn1_.apply(d1_.apply(x)));
  h = silu_of(dn2_.apply(d2_.apply(up1_.apply(h))));
  h = silu_of(dn3_.apply(d3_.apply(up2_.apply(h))));
  h = silu_of(dn4_.apply(d4_.apply(up3_.apply(h))));
  Tensor<float> y = nn::Sigmoid<float>::apply(d5_.apply(h));
  if (!batched) return y.reshaped({3, size_, size_});
  return y;
}

Tensor<float> Codec::forward(const Tensor<float>& rgb) {
  Tensor<float> h = ea1_.forward(en1_.forward(e1_.forward(rgb)));
  h = ea2_.forward(en2_.forward(e2_.forward(h)));
  h = ea3_.forward(en3_.forward(e3_.forward(h)));
  Tensor<float> z = tanh_.forward(e4_.forward(h));
  h = da1_.forward(dn1_.forward(d1_.forward(z)));
  h = da2_.forward(dn2_.forward(d2_.forward(up1_.forward(h))));
  h = da3_.forward(dn3_.forward(d3_.forward(up2_.forward(h))));
  h = da4_.forward(dn4_.forward(d4_.forward(up3_.forward(h))));
  return sig_.forward(d5_.forward(h));
}

void Codec::backward(const Tensor<float>& gy) {
  Tensor<float> g = d5_.backward(sig_.backward(gy));
  g = up3_.backward(d4_.backward(dn4_.backward(da4_.backward(g))));
  g = up2_.backward(d3_.backward(dn3_.backward(da3_.backward(g))));
  g = up1_.backward(d2_.backward(dn2_.backward(da2_.backward(g))));
  g = d1_.backward(g);
  g = e4_.backward(tanh_.backward(g));
  g = e3_.backward(en3_.backward(ea3_.backward(g)));
  g = e2_.backward(en2_.backward(ea2_.backward(g)));
  e1_.backward(en1_.backward(ea1_.backward(g)));
}

void Codec::save(const std::string& path) const {
  ser::Container c = nn::pack(params_);
  c.meta["kind"] = "codec";
  c.meta["version"] = 1;
  c.meta["size"] = size_;
  c.meta["latent_size"] = latent_size();
  c.meta["latent_channels"] = kLatentChannels;
  ser::save(path, c);
}

float mse(const Tensor<float>& a, const Tensor<float>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mse: shape mismatch");
  double acc = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return static_cast<float>(acc / static_cast<double>(a.numel()));
}

float psnr(const Tensor<float>& a, const Tensor<float>& b) {
  const float m = mse(a, b);
  return m <= 0 ? std::numeric_limits<float>::infinity()
                : 10.0f * std::log10(1.0f / m);
}

Tensor<float> LatentClip::frame(int f) const {
  if (f < 0 || f >= frames())
    throw std::out_of_range("LatentClip::frame: index " + std::to_string(f));
  const int h = latents.dim(2), w = latents.dim(3);
  Tensor<float> out({kLatentChannels, h, w});
  std::copy(latents.data() + static_cast<size_t>(f) * out.numel(),
            latents.data() + static_cast<size_t>(f + 1) * out.numel(),
            out.data());
  return out;
}

void LatentClip::validate() const {
  if (latents.ndim() != 4 || latents.dim(1) != kLatentChannels)
    throw std::invalid_argument("LatentClip: latents must be (F,4,h,w), got " +
                                latents.shape_str());
  const int h = latents.dim(2), w = latents.dim(3);
  if (h != w || h * kDownFactor != source_size)
    throw std::invalid_argument(
        "LatentClip: grid " + std::to_string(h) + "x" + std::to_string(w) +
        " is not source_size/8 for source_size " + std::to_string(source_size));
  if (!all_finite(latents))
    throw std::invalid_argument("LatentClip: non-finite latent values");
  if (!keypoints.empty() &&
      static_cast<int>(keypoints.size()) != frames())
    throw std::invalid_argument(
        "LatentClip: keypoints must be absent or one set per frame");
}

LatentClip make_latent_clip(const Codec& codec, const synth::VideoClip& clip) {
  LatentClip lc;
  lc.latents = encode_clip(codec, clip);
  lc.source_size = codec.size();
  lc.keypoints = clip.keypoints;
  lc.label = clip.label;
  lc.preset_name = clip.preset_name;
  lc.validate();
  return lc;
}

Tensor<float> encode_clip(const Codec& codec, const synth::VideoClip& clip) {
  const int F = static_cast<int>(clip.frames.size());
  if (F == 0) throw std::invalid_argument("encode_clip: clip has no frames");
  const int S = codec.size();
  Tensor<float> batch({F, 3, S, S});
  for (int f = 0; f < F; ++f) {
    const auto& fr = clip.frames[static_cast<size_t>(f)];
    if (fr.ndim() != 3 || fr.dim(1) != S || fr.dim(2) != S)
      throw std::invalid_argument("encode_clip: frame " + std::to_string(f) +
                                  " is " + fr.shape_str() + ", expected 3x" +
                                  std::to_string(S) + "x" + std::to_string(S));
    std::copy(fr.data(), fr.data() + fr.numel(),
              batch.data() + static_cast<size_t>(f) * fr.numel());
  }
  return codec.encode(batch);
}

void save_latent_dataset(const std::string& path,
                         const std::vector<LatentClip>& clips) {
  if (clips.empty())
    throw std::invalid_argument("save_latent_dataset: no clips");
  ser::Container c;
  c.meta["kind"] = "latent_dataset";
  c.meta["version"] = 1;
  nlohmann::json meta_clips = nlohmann::json::array();
  for (size_t i = 0; i < clips.size(); ++i) {
    clips[i].validate();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%05d", static_cast<int>(i));
    c.add(buf, clips[i].latents);
    nlohmann::json jc;
    jc["source_size"] = clips[i].source_size;
    jc["label"] = clips[i].label;
    jc["preset"] = clips[i].preset_name;
    if (!clips[i].keypoints.empty()) {
      nlohmann::json kps = nlohmann::json::array();
      for (const auto& ks : clips[i].keypoints)
        kps.push_back(synth::keypoints_to_json(ks));
      jc["keypoints"] = std::move(kps);
    }
    meta_clips.push_back(std::move(jc));
  }
  c.meta["clips"] = std::move(meta_clips);
  ser::save(path, c);
}

std::vector<LatentClip> load_latent_dataset(const std::string& path) {
  ser::Container c = ser::load(path);
  if (c.meta.value("kind", std::string()) != "latent_dataset")
    throw std::runtime_error("not a latent dataset: " + path);
  const auto& meta_clips = c.meta.at("clips");
  std::vector<LatentClip> out;
  for (size_t i = 0; i < meta_clips.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%05d", static_cast<int>(i));
    const Tensor<float>* t = c.find(buf);
    if (!t)
      throw std::runtime_error("latent dataset " + path + " missing tensor " +
                               buf);
    LatentClip lc;
    lc.latents = *t;
    const auto& jc = meta_clips.at(i);
    lc.source_size = jc.at("source_size").get<int>();
    lc.label = jc.value("label", std::string());
    lc.preset_name = jc.value("preset", std::string());
    if (jc.contains("keypoints"))
      for (const auto& jk : jc.at("keypoints"))
        lc.keypoints.push_back(synth::keypoints_from_json(jk));
    lc.validate();
    out.push_back(std::move(lc));
  }
  return out;
}

CodecTrainStats train_codec(Codec& codec,
                            const std::vector<synth::VideoClip>& dataset,
                            const CodecConfig& cfg) {
  if (dataset.empty())
    throw std::invalid_argument("train_codec: empty dataset");
  std::vector<const Tensor<float>*> frames;
  for (const auto& clip : dataset)
    for (const auto& f : clip.frames) frames.push_back(&f);
  if (frames.empty())
    throw std::invalid_argument("train_codec: dataset has no frames");
  const int S = codec.size();
  for (const auto* f : frames)
    if (f->ndim() != 3 || f->dim(0) != 3 || f->dim(1) != S || f->dim(2) != S)
      throw std::invalid_argument("train_codec: frame " + f->shape_str() +
                                  " does not match codec size " +
                                  std::to_string(S));

  Rng rng(cfg.seed);
  std::vector<int> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1],
              order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i)))]);

  const int n_hold = std::max(
      1, static_cast<int>(cfg.holdout_frac * static_cast<float>(frames.size())));
  std::vector<int> hold(order.begin(), order.begin() + n_hold);
  std::vector<int> train(order.begin() + n_hold, order.end());
  if (train.empty()) train = hold;  // degenerate tiny datasets

  auto holdout_mse = [&]() {
    double acc = 0;
    int64_t count = 0;
    const int B = cfg.batch;
    for (size_t at = 0; at < hold.size(); at += static_cast<size_t>(B)) {
      const int n = std::min<int>(B, static_cast<int>(hold.size() - at));
      Tensor<float> batch({n, 3, S, S});
      for (int i = 0; i < n; ++i)
        std::copy(frames[static_cast<size_t>(hold[at + static_cast<size_t>(i)])]->data(),
                  frames[static_cast<size_t>(hold[at + static_cast<size_t>(i)])]->data() +
                      static_cast<size_t>(3) * S * S,
                  batch.data() + static_cast<size_t>(i) * 3 * S * S);
      Tensor<float> rec = codec.decode(codec.encode(batch));
      for (int64_t i = 0; i < rec.numel(); ++i) {
        const double d = rec[i] - batch[i];
        acc += d * d;
      }
      count += rec.numel();
    }
    return static_cast<float>(acc / static_cast<double>(count));
  };

  CodecTrainStats stats;
  stats.untrained_holdout_mse = holdout_mse();

  nn::AdamOpt<float> opt(cfg.lr);
  const int steps_per_epoch =
      (static_cast<int>(train.size()) + cfg.batch - 1) / cfg.batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.fork(static_cast<uint64_t>(epoch) + 1000);
    for (size_t i = train.size(); i > 1; --i)
      std::swap(train[i - 1],
                train[static_cast<size_t>(erng.uniform_int(0, static_cast<int>(i)))]);
    for (int step = 0; step < steps_per_epoch; ++step) {
      const size_t at = static_cast<size_t>(step) * cfg.batch;
      const int n = std::min<int>(cfg.batch, static_cast<int>(train.size() - at));
      Tensor<float> batch({n, 3, S, S});
      for (int i = 0; i < n; ++i)
        std::copy(frames[static_cast<size_t>(train[at + static_cast<size_t>(i)])]->data(),
                  frames[static_cast<size_t>(train[at + static_cast<size_t>(i)])]->data() +
                      static_cast<size_t>(3) * S * S,
                  batch.data() + static_cast<size_t>(i) * 3 * S * S);
      Tensor<float> rec = codec.forward(batch);
      stats.loss.push_back(mse(rec, batch));
      Tensor<float> gy(rec.shape());
      const float scale = 2.0f / static_cast<float>(rec.numel());
      for (int64_t i = 0; i < rec.numel(); ++i)
        gy[i] = scale * (rec[i] - batch[i]);
      codec.params().zero_grad();
      codec.backward(gy);
      opt.step(codec.params());
    }
  }

  stats.holdout_mse = holdout_mse();
  stats.holdout_psnr =
      stats.holdout_mse <= 0
          ? std::numeric_limits<float>::infinity()
          : 10.0f * std::log10(1.0f / stats.holdout_mse);
  return stats;
}

}  // namespace lomo::codec
