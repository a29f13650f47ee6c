#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lomo/nn/attention.hpp"
#include "json.hpp"

namespace lomo::diffusion {

using lomo::Tensor;

// Anything that maps (noisy latent clip, timestep, class id) -> noise estimate.
// The denoising loop and the training loss only ever talk to this interface,
// which keeps the math testable against trivial stand-ins.
template <typename T>
struct Denoiser {
  virtual ~Denoiser() = default;
  virtual Tensor<T> forward(const Tensor<T>& z, int t, int cond) = 0;
  virtual void backward(const Tensor<T>& /*gy*/) {}
};

// Predicts zero noise for every input. Under this stub the samplers reduce to
// closed-form rescalings, which the tests exploit.
template <typename T>
struct ZeroDenoiser : Denoiser<T> {
  Tensor<T> forward(const Tensor<T>& z, int, int) override {
    Tensor<T> y(z.shape());
    return y;
  }
};

struct UNetConfig {
  int channels = 4;
  int width = 64;
  int heads = 4;
  int groups = 8;
  int time_dim = 128;
  int cond_dim = 64;
  int num_classes = 4;
  int frames = 10;
};

namespace detail {

// Classic sin/cos timestep features: dim/2 geometric frequencies.
template <typename T>
Tensor<T> time_features(int t, int dim) {
  if (dim < 2 || dim % 2 != 0)
    throw std::invalid_argument("time_features: dim must be even and >= 2");
  const int half = dim / 2;
  Tensor<T> f({1, dim});
  for (int k = 0; k < half; ++k) {
    const double w = std::exp(-std::log(10000.0) * double(k) / double(half));
    f.at(0, k) = T(std::sin(double(t) * w));
    f.at(0, half + k) = T(std::cos(double(t) * w));
  }
  return f;
}

// (A,B,C) -> (B,A,C), rows of length C copied contiguously.
template <typename T>
Tensor<T> swap01(const Tensor<T>& t) {
  const int A = t.dim(0), B = t.dim(1), C = t.dim(2);
  Tensor<T> o({B, A, C});
  for (int a = 0; a < A; ++a)
    for (int b = 0; b < B; ++b) {
      const T* src = t.data() + (size_t(a) * B + b) * C;
      T* dst = o.data() + (size_t(b) * A + a) * C;
      for (int c = 0; c < C; ++c) dst[c] = src[c];
    }
  return o;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const int B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1);
  const int H = a.dim(2), W = a.dim(3);
  Tensor<T> o({B, Ca + Cb, H, W});
  const size_t plane = size_t(H) * W;
  for (int n = 0; n < B; ++n) {
    T* dst = o.data() + size_t(n) * (Ca + Cb) * plane;
    const T* pa = a.data() + size_t(n) * Ca * plane;
    const T* pb = b.data() + size_t(n) * Cb * plane;
    for (size_t i = 0; i < Ca * plane; ++i) dst[i] = pa[i];
    for (size_t i = 0; i < Cb * plane; ++i) dst[Ca * plane + i] = pb[i];
  }
  return o;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, int ca) {
  const int B = g.dim(0), C = g.dim(1), H = g.dim(2), W = g.dim(3);
  const int cb = C - ca;
  Tensor<T> a({B, ca, H, W}), b({B, cb, H, W});
  const size_t plane = size_t(H) * W;
  for (int n = 0; n < B; ++n) {
    const T* src = g.data() + size_t(n) * C * plane;
    T* pa = a.data() + size_t(n) * ca * plane;
    T* pb = b.data() + size_t(n) * cb * plane;
    for (size_t i = 0; i < ca * plane; ++i) pa[i] = src[i];
    for (size_t i = 0; i < cb * plane; ++i) pb[i] = src[ca * plane + i];
  }
  return {std::move(a), std::move(b)};
}

// norm -> silu -> conv -> (+ time bias) -> norm -> silu -> conv, plus skip.
// conv2 starts at zero so a fresh block is the identity (or the 1x1 skip).
template <typename T>
class ResBlock {
 public:
  ResBlock(const std::string& name, int in, int out, int time_dim, int groups)
      : in_(in), out_(out),
        gn1_(name + ".gn1", groups, in), gn2_(name + ".gn2", groups, out),
        conv1_(name + ".conv1", in, out, 3, 1, 1),
        conv2_(name + ".conv2", out, out, 3, 1, 1),
        temb_(name + ".temb", time_dim, out),
        skip_(name + ".skip", in, out, 1, 1, 0) {}

  void init(Rng& rng) {
    conv1_.init(rng);
    temb_.init(rng);
    if (in_ != out_) skip_.init(rng);
  }

  void collect(nn::ParamSet<T>& ps) {
    gn1_.collect(ps);
    conv1_.collect(ps);
    temb_.collect(ps);
    gn2_.collect(ps);
    conv2_.collect(ps);
    if (in_ != out_) skip_.collect(ps);
  }

  // temb is the shared (1,time_dim) embedding; its projection is added as a
  // per-channel bias between the two convs.
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& temb) {
    Tensor<T> h = conv1_.forward(act1_.forward(gn1_.forward(x)));
    Tensor<T> tv = temb_.forward(temb);
    const int B = h.dim(0), C = h.dim(1), H = h.dim(2), W = h.dim(3);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const T bias = tv.at(0, c);
        T* p = h.data() + (size_t(b) * C + c) * H * W;
        for (int i = 0; i < H * W; ++i) p[i] += bias;
      }
    Tensor<T> f = conv2_.forward(act2_.forward(gn2_.forward(h)));
    Tensor<T> s = (in_ != out_) ? skip_.forward(x) : x;
    for (int64_t i = 0; i < f.numel(); ++i) f.data()[i] += s.data()[i];
    return f;
  }

  // Returns gx; the gradient w.r.t. the shared time embedding is accumulated
  // into gtemb (resized on first use).
  Tensor<T> backward(const Tensor<T>& gy, Tensor<T>& gtemb) {
    Tensor<T> gh = gn2_.backward(act2_.backward(conv2_.backward(gy)));
    const int B = gh.dim(0), C = gh.dim(1), H = gh.dim(2), W = gh.dim(3);
    Tensor<T> gtv({1, C});
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const T* p = gh.data() + (size_t(b) * C + c) * H * W;
        T s = 0;
        for (int i = 0; i < H * W; ++i) s += p[i];
        gtv.at(0, c) += s;
      }
    Tensor<T> gt = temb_.backward(gtv);
    if (gtemb.numel() == 0) gtemb = Tensor<T>(gt.shape());
    for (int64_t i = 0; i < gt.numel(); ++i) gtemb.data()[i] += gt.data()[i];

    Tensor<T> gx = gn1_.backward(act1_.backward(conv1_.backward(gh)));
    if (in_ != out_) {
      Tensor<T> gs = skip_.backward(gy);
      for (int64_t i = 0; i < gx.numel(); ++i) gx.data()[i] += gs.data()[i];
    } else {
      for (int64_t i = 0; i < gx.numel(); ++i) gx.data()[i] += gy.data()[i];
    }
    return gx;
  }

 private:
  int in_, out_;
  nn::GroupNorm<T> gn1_, gn2_;
  nn::SiLU<T> act1_, act2_;
  nn::Conv2d<T> conv1_, conv2_;
  nn::Linear<T> temb_;
  nn::Conv2d<T> skip_;
};

// Pre-norm residual stack over a (frames, C, h, w) clip:
//   spatial self-attention, cross-attention to the class vector,
//   temporal self-attention (tokens regrouped per cell), feed-forward.
// Every residual branch ends in a zero-initialised projection.
template <typename T>
class TransformerBlock {
 public:
  TransformerBlock(const std::string& name, int dim, int heads, int cond_dim)
      : dim_(dim),
        ln1_(name + ".ln1", dim), ln2_(name + ".ln2", dim),
        ln3_(name + ".ln3", dim), ln4_(name + ".ln4", dim),
        self_(name + ".self", dim, heads),
        cross_(name + ".cross", dim, heads),
        temporal_(name + ".temporal", dim, heads),
        cond_proj_(name + ".cond_proj", cond_dim, dim),
        ff_(name + ".ff", dim) {}

  void init(Rng& rng) {
    self_.q_proj.init(rng);
    self_.k_proj.init(rng);
    self_.v_proj.init(rng);
    cross_.q_proj.init(rng);
    cross_.k_proj.init(rng);
    cross_.v_proj.init(rng);
    temporal_.q_proj.init(rng);
    temporal_.k_proj.init(rng);
    temporal_.v_proj.init(rng);
    cond_proj_.init(rng);
    ff_.fc1.init(rng);
  }

  void collect(nn::ParamSet<T>& ps) {
    ln1_.collect(ps);
    self_.collect(ps);
    ln2_.collect(ps);
    cross_.collect(ps);
    cond_proj_.collect(ps);
    ln3_.collect(ps);
    temporal_.collect(ps);
    ln4_.collect(ps);
    ff_.collect(ps);
  }

  void add_lora(int rank, T alpha, Rng& rng) {
    self_.add_lora(rank, alpha, rng);
    cross_.add_lora(rank, alpha, rng);
    temporal_.add_lora(rank, alpha, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& cond) {
    F_ = x.dim(0);
    H_ = x.dim(2);
    W_ = x.dim(3);
    Tensor<T> t = nn::nchw_to_tokens(x);
    add_into(t, self_.forward(ln1_.forward(t)));

    Tensor<T> ctx1 = cond_proj_.forward(cond);
    ctx_ = Tensor<T>({F_, 1, dim_});
    for (int f = 0; f < F_; ++f)
      for (int c = 0; c < dim_; ++c) ctx_.at(f, 0, c) = ctx1.at(0, 0, c);
    add_into(t, cross_.forward(ln2_.forward(t), ctx_));

    Tensor<T> p = swap01(t);
    add_into(p, temporal_.forward(ln3_.forward(p)));
    t = swap01(p);

    add_into(t, ff_.forward(ln4_.forward(t)));
    return nn::tokens_to_nchw(t, H_, W_);
  }

  // Returns gx; the class-vector gradient is accumulated into gcond.
  Tensor<T> backward(const Tensor<T>& gy, Tensor<T>& gcond) {
    Tensor<T> gt = nn::nchw_to_tokens(gy);
    add_into(gt, ln4_.backward(ff_.backward(gt)));

    Tensor<T> gp = swap01(gt);
    add_into(gp, ln3_.backward(temporal_.backward(gp)));
    gt = swap01(gp);

    Tensor<T> gctx;
    add_into(gt, ln2_.backward(cross_.backward(gt, gctx)));
    Tensor<T> gc1({1, 1, dim_});
    for (int f = 0; f < F_; ++f)
      for (int c = 0; c < dim_; ++c) gc1.at(0, 0, c) += gctx.at(f, 0, c);
    Tensor<T> gcv = cond_proj_.backward(gc1);
    if (gcond.numel() == 0) gcond = Tensor<T>(gcv.shape());
    for (int64_t i = 0; i < gcv.numel(); ++i)
      gcond.data()[i] += gcv.data()[i];

    add_into(gt, ln1_.backward(self_.backward(gt)));
    return nn::tokens_to_nchw(gt, H_, W_);
  }

 private:
  static void add_into(Tensor<T>& dst, const Tensor<T>& src) {
    for (int64_t i = 0; i < dst.numel(); ++i) dst.data()[i] += src.data()[i];
  }

  int dim_;
  int F_ = 0, H_ = 0, W_ = 0;
  nn::LayerNorm<T> ln1_, ln2_, ln3_, ln4_;
  nn::MultiHeadAttention<T> self_, cross_, temporal_;
  nn::Linear<T> cond_proj_;
  nn::FeedForward<T> ff_;
  Tensor<T> ctx_;
};

}  // namespace detail

// Small two-level video UNet over latent clips (frames, channels, g, g).
// Pseudo-3D: convolutions see one frame at a time (frames ride the batch
// axis); the transformer blocks mix frames through temporal attention.
// All residual branches end in zero-initialised layers, so a freshly
// initialised net predicts exactly zero noise.
template <typename T>
class UNet : public Denoiser<T> {
 public:
  explicit UNet(const UNetConfig& cfg = {})
      : cfg_(cfg),
        cond_table_("unet.cond", cfg.num_classes, cfg.cond_dim),
        tm1_("unet.time1", cfg.time_dim, cfg.time_dim),
        tm2_("unet.time2", cfg.time_dim, cfg.time_dim),
        conv_in_("unet.conv_in", cfg.channels, cfg.width, 3, 1, 1),
        r0a_("unet.r0a", cfg.width, cfg.width, cfg.time_dim, cfg.groups),
        tb0_("unet.tb0", cfg.width, cfg.heads, cfg.cond_dim),
        r0b_("unet.r0b", cfg.width, cfg.width, cfg.time_dim, cfg.groups),
        down_("unet.down", cfg.width, cfg.width, 3, 2, 1),
        r1a_("unet.r1a", cfg.width, 2 * cfg.width, cfg.time_dim, cfg.groups),
        tb1_("unet.tb1", 2 * cfg.width, cfg.heads, cfg.cond_dim),
        r1b_("unet.r1b", 2 * cfg.width, 2 * cfg.width, cfg.time_dim,
             cfg.groups),
        up_conv_("unet.up_conv", 2 * cfg.width, cfg.width, 3, 1, 1),
        r2_("unet.r2", 2 * cfg.width, cfg.width, cfg.time_dim, cfg.groups),
        tb2_("unet.tb2", cfg.width, cfg.heads, cfg.cond_dim),
        out_norm_("unet.out_norm", cfg.groups, cfg.width),
        conv_out_("unet.conv_out", cfg.width, cfg.channels, 3, 1, 1) {
    collect_();
  }

  UNet(const UNet&) = delete;
  UNet& operator=(const UNet&) = delete;

  const UNetConfig& config() const { return cfg_; }
  nn::ParamSet<T>& params() { return params_; }
  const nn::ParamSet<T>& params() const { return params_; }

  void init(Rng& rng) {
    cond_table_.init(rng);
    tm1_.init(rng);
    tm2_.init(rng);
    conv_in_.init(rng);
    r0a_.init(rng);
    tb0_.init(rng);
    r0b_.init(rng);
    down_.init(rng);
    r1a_.init(rng);
    tb1_.init(rng);
    r1b_.init(rng);
    up_conv_.init(rng);
    r2_.init(rng);
    tb2_.init(rng);
    // conv_out_ stays zero: the net starts out predicting zero noise.
  }

  // Attaches rank-r adapters to every attention projection (spatial, cross
  // and temporal, q/k/v/out each) and refreshes the parameter set.
  void add_lora(int rank, T alpha, Rng& rng) {
    tb0_.add_lora(rank, alpha, rng);
    tb1_.add_lora(rank, alpha, rng);
    tb2_.add_lora(rank, alpha, rng);
    collect_();
  }

  Tensor<T> forward(const Tensor<T>& z, int t, int cond) override {
    if (z.ndim() != 4 || z.dim(1) != cfg_.channels)
      throw std::invalid_argument("UNet: expected (frames, " +
                                  std::to_string(cfg_.channels) +
                                  ", h, w) input, got " + z.shape_str());
    if (z.dim(2) % 2 != 0 || z.dim(3) % 2 != 0)
      throw std::invalid_argument("UNet: latent side must be even");
    if (cond < 0 || cond >= cfg_.num_classes)
      throw std::invalid_argument("UNet: class id out of range");

    Tensor<T> tf = detail::time_features<T>(t, cfg_.time_dim);
    temb_ = tm2_.forward(tact_.forward(tm1_.forward(tf)));

    cond_id_ = cond;
    Tensor<T> cv({1, 1, cfg_.cond_dim});
    cond_table_.copy_row(cond, cv.data());

    Tensor<T> h = conv_in_.forward(z);
    h = r0a_.forward(h, temb_);
    h = tb0_.forward(h, cv);
    h = r0b_.forward(h, temb_);
    skip0_ = h;

    h = down_.forward(h);
    h = r1a_.forward(h, temb_);
    h = tb1_.forward(h, cv);
    h = r1b_.forward(h, temb_);

    h = up_conv_.forward(up_.forward(h));
    h = detail::concat_channels(h, skip0_);
    h = r2_.forward(h, temb_);
    h = tb2_.forward(h, cv);

    return conv_out_.forward(out_act_.forward(out_norm_.forward(h)));
  }

  void backward(const Tensor<T>& gy) override {
    Tensor<T> gtemb, gcond;

    Tensor<T> g = out_norm_.backward(out_act_.backward(conv_out_.backward(gy)));
    g = tb2_.backward(g, gcond);
    g = r2_.backward(g, gtemb);
    auto [gu, gskip] = detail::split_channels(g, cfg_.width);
    g = up_.backward(up_conv_.backward(gu));

    g = r1b_.backward(g, gtemb);
    g = tb1_.backward(g, gcond);
    g = r1a_.backward(g, gtemb);
    g = down_.backward(g);

    for (int64_t i = 0; i < g.numel(); ++i) g.data()[i] += gskip.data()[i];
    g = r0b_.backward(g, gtemb);
    g = tb0_.backward(g, gcond);
    g = r0a_.backward(g, gtemb);
    conv_in_.backward(g);

    tm1_.backward(tact_.backward(tm2_.backward(gtemb)));
    cond_table_.add_row_grad(cond_id_, gcond.data());
  }

 private:
  void collect_() {
    params_ = nn::ParamSet<T>();
    cond_table_.collect(params_);
    tm1_.collect(params_);
    tm2_.collect(params_);
    conv_in_.collect(params_);
    r0a_.collect(params_);
    tb0_.collect(params_);
    r0b_.collect(params_);
    down_.collect(params_);
    r1a_.collect(params_);
    tb1_.collect(params_);
    r1b_.collect(params_);
    up_conv_.collect(params_);
    r2_.collect(params_);
    tb2_.collect(params_);
    out_norm_.collect(params_);
    conv_out_.collect(params_);
  }

  UNetConfig cfg_;
  nn::Embedding<T> cond_table_;
  nn::Linear<T> tm1_, tm2_;
  nn::SiLU<T> tact_;
  nn::Conv2d<T> conv_in_;
  detail::ResBlock<T> r0a_;
  detail::TransformerBlock<T> tb0_;
  detail::ResBlock<T> r0b_;
  nn::Conv2d<T> down_;
  detail::ResBlock<T> r1a_;
  detail::TransformerBlock<T> tb1_;
  detail::ResBlock<T> r1b_;
  nn::Upsample2x<T> up_;
  nn::Conv2d<T> up_conv_;
  detail::ResBlock<T> r2_;
  detail::TransformerBlock<T> tb2_;
  nn::GroupNorm<T> out_norm_;
  nn::SiLU<T> out_act_;
  nn::Conv2d<T> conv_out_;
  nn::ParamSet<T> params_;

  int cond_id_ = 0;
  Tensor<T> temb_, skip0_;
};

// Base-model checkpoint IO. The file carries the architecture and the noise
// schedule it was trained under; loading rebuilds the net from that record.
void save_denoiser(const UNet<float>& net, const nlohmann::json& extra_meta,
                   const std::string& path);
std::unique_ptr<UNet<float>> load_denoiser(const std::string& path,
                                           nlohmann::json* meta_out = nullptr);

extern template class UNet<float>;
extern template class UNet<double>;

}  // namespace lomo::diffusion
