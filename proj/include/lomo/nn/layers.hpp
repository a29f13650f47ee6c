#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lomo/core/kernels.hpp"
#include "lomo/core/rng.hpp"
#include "lomo/nn/params.hpp"

// Layers follow one convention: forward() caches whatever backward() needs,
// backward(gy) returns the input gradient as a fresh tensor and accumulates
// into parameter .g buffers. Parameters with trainable == false skip their
// gradient computation entirely, not just the update.
namespace lomo::nn {

template <typename T>
Tensor<T> transposed(const Tensor<T>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("transposed: need 2d");
  Tensor<T> out({a.dim(1), a.dim(0)});
  kern::ref::transpose(a.data(), a.dim(0), a.dim(1), out.data());
  return out;
}

// y = x W^T + b, optionally plus a rank-r bypass scale * (x A^T) B^T that can
// be trained while W stays frozen. Accepts any shape with last dim == in.
template <typename T>
class Linear {
 public:
  Linear(const std::string& name, int in, int out, bool with_bias = true)
      : in_(in), out_(out), with_bias_(with_bias) {
    weight = Param<T>(name + ".w", {out, in});
    if (with_bias_) bias = Param<T>(name + ".b", {out});
  }

  void init(Rng& rng) {
    rng.fill_normal(weight.w.data(), weight.w.numel(), T(0),
                    T(1) / std::sqrt(T(in_)));
  }

  // Adapter starts as an exact no-op: A is random, B is zero.
  void add_lora(int rank, T alpha, Rng& rng) {
    lora_rank_ = rank;
    lora_scale_ = alpha / T(rank);
    lora_a = Param<T>(weight.name + ".lora_a", {rank, in_});
    lora_b = Param<T>(weight.name + ".lora_b", {out_, rank});
    rng.fill_normal(lora_a.w.data(), lora_a.w.numel(), T(0),
                    T(1) / std::sqrt(T(in_)));
  }
  bool has_lora() const { return lora_rank_ > 0; }
  T lora_scale() const { return lora_scale_; }

  void collect(ParamSet<T>& ps) {
    ps.add(&weight);
    if (with_bias_) ps.add(&bias);
    if (has_lora()) {
      ps.add(&lora_a);
      ps.add(&lora_b);
    }
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.dim(x.ndim() - 1) != in_)
      throw std::invalid_argument("Linear " + weight.name + ": last dim != " +
                                  std::to_string(in_));
    const int rows = static_cast<int>(x.numel() / in_);
    x_ = x.reshaped({rows, in_});
    std::vector<int> out_shape = x.shape();
    out_shape.back() = out_;
    Tensor<T> y({rows, out_});
    kern::Kern<T>::gemm_nt(rows, out_, in_, T(1), x_.data(), in_,
                           weight.w.data(), in_, T(0), y.data(), out_);
    if (with_bias_)
      for (int r = 0; r < rows; ++r)
        kern::Kern<T>::add(y.data() + static_cast<size_t>(r) * out_,
                           bias.w.data(), y.data() + static_cast<size_t>(r) * out_,
                           static_cast<size_t>(out_));
    if (has_lora()) {
      u_ = Tensor<T>({rows, lora_rank_});
      kern::Kern<T>::gemm_nt(rows, lora_rank_, in_, T(1), x_.data(), in_,
                             lora_a.w.data(), in_, T(0), u_.data(), lora_rank_);
      kern::Kern<T>::gemm_nt(rows, out_, lora_rank_, lora_scale_, u_.data(),
                             lora_rank_, lora_b.w.data(), lora_rank_, T(1),
                             y.data(), out_);
    }
    return y.reshaped(out_shape);
  }

  Tensor<T> backward(const Tensor<T>& gy_in) {
    const int rows = x_.dim(0);
    Tensor<T> gy = gy_in.reshaped({rows, out_});
    Tensor<T> gyt;
    if (weight.trainable || (has_lora() && lora_b.trainable))
      gyt = transposed(gy);
    if (weight.trainable)
      kern::Kern<T>::gemm_nn(out_, in_, rows, T(1), gyt.data(), rows,
                             x_.data(), in_, T(1), weight.g.data(), in_);
    if (with_bias_ && bias.trainable)
      for (int r = 0; r < rows; ++r)
        kern::Kern<T>::add(bias.g.data(),
                           gy.data() + static_cast<size_t>(r) * out_,
                           bias.g.data(), static_cast<size_t>(out_));
    Tensor<T> gx({rows, in_});
    kern::Kern<T>::gemm_nn(rows, in_, out_, T(1), gy.data(), out_,
                           weight.w.data(), in_, T(0), gx.data(), in_);
    if (has_lora()) {
      Tensor<T> gu({rows, lora_rank_});
      kern::Kern<T>::gemm_nn(rows, lora_rank_, out_, lora_scale_, gy.data(),
                             out_, lora_b.w.data(), lora_rank_, T(0), gu.data(),
                             lora_rank_);
      if (lora_b.trainable)
        kern::Kern<T>::gemm_nn(out_, lora_rank_, rows, lora_scale_, gyt.data(),
                               rows, u_.data(), lora_rank_, T(1),
                               lora_b.g.data(), lora_rank_);
      if (lora_a.trainable) {
        Tensor<T> gut = transposed(gu);
        kern::Kern<T>::gemm_nn(lora_rank_, in_, rows, T(1), gut.data(), rows,
                               x_.data(), in_, T(1), lora_a.g.data(), in_);
      }
      kern::Kern<T>::gemm_nn(rows, in_, lora_rank_, T(1), gu.data(),
                             lora_rank_, lora_a.w.data(), in_, T(1), gx.data(),
                             in_);
    }
    std::vector<int> in_shape = gy_in.shape();
    in_shape.back() = in_;
    return gx.reshaped(in_shape);
  }

  int fan_in() const { return in_; }
  int fan_out() const { return out_; }

  Param<T> weight, bias;
  Param<T> lora_a, lora_b;

 private:
  int in_, out_;
  bool with_bias_;
  int lora_rank_ = 0;
  T lora_scale_ = T(0);
  Tensor<T> x_, u_;
};

// 2d convolution via im2col + gemm over (B,C,H,W); pseudo-3d convs in the
// denoiser pass their frame axis through B.
template <typename T>
class Conv2d {
 public:
  Conv2d(const std::string& name, int in_ch, int out_ch, int k, int stride = 1,
         int pad = -1)
      : ic_(in_ch), oc_(out_ch), k_(k), stride_(stride),
        pad_(pad < 0 ? k / 2 : pad) {
    weight = Param<T>(name + ".w", {out_ch, in_ch, k, k});
    bias = Param<T>(name + ".b", {out_ch});
  }

  void init(Rng& rng) {
    rng.fill_normal(weight.w.data(), weight.w.numel(), T(0),
                    std::sqrt(T(2) / T(ic_ * k_ * k_)));
  }

  void collect(ParamSet<T>& ps) {
    ps.add(&weight);
    ps.add(&bias);
  }

  int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    return apply(x);
  }

  // Inference path: same math as forward, no state touched.
  Tensor<T> apply(const Tensor<T>& x) const {
    if (x.ndim() != 4 || x.dim(1) != ic_)
      throw std::invalid_argument("Conv2d " + weight.name + ": bad input " +
                                  x.shape_str());
    const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int OH = out_size(H), OW = out_size(W);
    const int L = OH * OW, CKK = ic_ * k_ * k_;
    Tensor<T> y({B, oc_, OH, OW});
    Tensor<T> col({CKK, L});
    for (int b = 0; b < B; ++b) {
      im2col(x, b, H, W, OH, OW, col);
      T* yb = y.data() + static_cast<size_t>(b) * oc_ * L;
      kern::Kern<T>::gemm_nn(oc_, L, CKK, T(1), weight.w.data(), CKK,
                             col.data(), L, T(0), yb, L);
      for (int o = 0; o < oc_; ++o) {
        const T bv = bias.w[o];
        T* row = yb + static_cast<size_t>(o) * L;
        for (int l = 0; l < L; ++l) row[l] += bv;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const int B = x_.dim(0), H = x_.dim(2), W = x_.dim(3);
    const int OH = out_size(H), OW = out_size(W);
    const int L = OH * OW, CKK = ic_ * k_ * k_;
    Tensor<T> gx(x_.shape());
    Tensor<T> col({CKK, L});
    Tensor<T> dcol({CKK, L});
    Tensor<T> wt = transposed(weight.w.reshaped({oc_, CKK}));
    for (int b = 0; b < B; ++b) {
      const T* gyb = gy.data() + static_cast<size_t>(b) * oc_ * L;
      if (weight.trainable) {
        im2col(x_, b, H, W, OH, OW, col);
        kern::Kern<T>::gemm_nt(oc_, CKK, L, T(1), gyb, L, col.data(), L, T(1),
                               weight.g.data(), CKK);
      }
      if (bias.trainable)
        for (int o = 0; o < oc_; ++o)
          bias.g[o] += kern::Kern<T>::sum(gyb + static_cast<size_t>(o) * L,
                                          static_cast<size_t>(L));
      kern::Kern<T>::gemm_nn(CKK, L, oc_, T(1), wt.data(), oc_, gyb, L, T(0),
                             dcol.data(), L);
      col2im(dcol, b, H, W, OH, OW, gx);
    }
    return gx;
  }

  Param<T> weight, bias;

 private:
  void im2col(const Tensor<T>& x, int b, int H, int W, int OH, int OW,
              Tensor<T>& col) const {
    const int L = OH * OW;
    const T* xb = x.data() + static_cast<size_t>(b) * ic_ * H * W;
    T* cp = col.data();
    for (int c = 0; c < ic_; ++c)
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          T* row = cp;
          cp += L;
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = oy * stride_ + ki - pad_;
            if (iy < 0 || iy >= H) {
              for (int ox = 0; ox < OW; ++ox) row[oy * OW + ox] = T(0);
              continue;
            }
            const T* src = xb + (static_cast<size_t>(c) * H + iy) * W;
            for (int ox = 0; ox < OW; ++ox) {
              const int ix = ox * stride_ + kj - pad_;
              row[oy * OW + ox] = (ix < 0 || ix >= W) ? T(0) : src[ix];
            }
          }
        }
  }

  void col2im(const Tensor<T>& dcol, int b, int H, int W, int OH, int OW,
              Tensor<T>& gx) const {
    const int L = OH * OW;
    T* gb = gx.data() + static_cast<size_t>(b) * ic_ * H * W;
    const T* cp = dcol.data();
    for (int c = 0; c < ic_; ++c)
      for (int ki = 0; ki < k_; ++ki)
        for (int kj = 0; kj < k_; ++kj) {
          const T* row = cp;
          cp += L;
          for (int oy = 0; oy < OH; ++oy) {
            const int iy = oy * stride_ + ki - pad_;
            if (iy < 0 || iy >= H) continue;
            T* dst = gb + (static_cast<size_t>(c) * H + iy) * W;
            for (int ox = 0; ox < OW; ++ox) {
              const int ix = ox * stride_ + kj - pad_;
              if (ix >= 0 && ix < W) dst[ix] += row[oy * OW + ox];
            }
          }
        }
  }

  int ic_, oc_, k_, stride_, pad_;
  Tensor<T> x_;
};

template <typename T>
class GroupNorm {
 public:
  GroupNorm(const std::string& name, int groups, int channels, T eps = T(1e-5))
      : groups_(groups), ch_(channels), eps_(eps) {
    if (channels % groups != 0)
      throw std::invalid_argument("GroupNorm: channels % groups != 0");
    gamma = Param<T>(name + ".g", {channels});
    beta = Param<T>(name + ".b", {channels});
    gamma.w.fill(T(1));
  }

  void collect(ParamSet<T>& ps) {
    ps.add(&gamma);
    ps.add(&beta);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (C != ch_) throw std::invalid_argument("GroupNorm: channel mismatch");
    const int cg = C / groups_;
    const int64_t hw = static_cast<int64_t>(H) * W;
    const int64_t m = cg * hw;
    xhat_ = Tensor<T>(x.shape());
    inv_ = Tensor<T>({B, groups_});
    Tensor<T> y(x.shape());
    for (int b = 0; b < B; ++b)
      for (int g = 0; g < groups_; ++g) {
        const T* xp = x.data() + (static_cast<size_t>(b) * C + g * cg) * hw;
        T mu = kern::Kern<T>::sum(xp, static_cast<size_t>(m)) / T(m);
        T var = T(0);
        for (int64_t i = 0; i < m; ++i) {
          const T d = xp[i] - mu;
          var += d * d;
        }
        var /= T(m);
        const T inv = T(1) / std::sqrt(var + eps_);
        inv_.at(b, g) = inv;
        T* xh = xhat_.data() + (static_cast<size_t>(b) * C + g * cg) * hw;
        T* yp = y.data() + (static_cast<size_t>(b) * C + g * cg) * hw;
        for (int c = 0; c < cg; ++c) {
          const T ga = gamma.w[g * cg + c], be = beta.w[g * cg + c];
          for (int64_t i = 0; i < hw; ++i) {
            const T v = (xp[c * hw + i] - mu) * inv;
            xh[c * hw + i] = v;
            yp[c * hw + i] = ga * v + be;
          }
        }
      }
    return y;
  }

  Tensor<T> apply(const Tensor<T>& x) const {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (C != ch_) throw std::invalid_argument("GroupNorm: channel mismatch");
    const int cg = C / groups_;
    const int64_t hw = static_cast<int64_t>(H) * W;
    const int64_t m = cg * hw;
    Tensor<T> y(x.shape());
    for (int b = 0; b < B; ++b)
      for (int g = 0; g < groups_; ++g) {
        const T* xp = x.data() + (static_cast<size_t>(b) * C + g * cg) * hw;
        T* yp = y.data() + (static_cast<size_t>(b) * C + g * cg) * hw;
        T mu = kern::Kern<T>::sum(xp, static_cast<size_t>(m)) / T(m);
        T var = T(0);
        for (int64_t i = 0; i < m; ++i) {
          const T d = xp[i] - mu;
          var += d * d;
        }
        const T inv = T(1) / std::sqrt(var / T(m) + eps_);
        for (int c = 0; c < cg; ++c) {
          const T ga = gamma.w[g * cg + c], be = beta.w[g * cg + c];
          for (int64_t i = 0; i < hw; ++i)
            yp[c * hw + i] = ga * (xp[c * hw + i] - mu) * inv + be;
        }
      }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const int B = gy.dim(0), C = gy.dim(1), H = gy.dim(2), W = gy.dim(3);
    const int cg = C / groups_;
    const int64_t hw = static_cast<int64_t>(H) * W;
    const int64_t m = cg * hw;
    Tensor<T> gx(gy.shape());
    for (int b = 0; b < B; ++b)
      for (int g = 0; g < groups_; ++g) {
        const size_t base = (static_cast<size_t>(b) * C + g * cg) * hw;
        const T* gp = gy.data() + base;
        const T* xh = xhat_.data() + base;
        T* gxp = gx.data() + base;
        T s1 = T(0), s2 = T(0);
        for (int c = 0; c < cg; ++c) {
          const T ga = gamma.w[g * cg + c];
          for (int64_t i = 0; i < hw; ++i) {
            const T dxh = gp[c * hw + i] * ga;
            s1 += dxh;
            s2 += dxh * xh[c * hw + i];
          }
        }
        s1 /= T(m);
        s2 /= T(m);
        const T inv = inv_.at(b, g);
        for (int c = 0; c < cg; ++c) {
          const T ga = gamma.w[g * cg + c];
          if (gamma.trainable || beta.trainable) {
            T dg = T(0), db = T(0);
            for (int64_t i = 0; i < hw; ++i) {
              dg += gp[c * hw + i] * xh[c * hw + i];
              db += gp[c * hw + i];
            }
            gamma.g[g * cg + c] += dg;
            beta.g[g * cg + c] += db;
          }
          for (int64_t i = 0; i < hw; ++i) {
            const T dxh = gp[c * hw + i] * ga;
            gxp[c * hw + i] = inv * (dxh - s1 - xh[c * hw + i] * s2);
          }
        }
      }
    return gx;
  }

  Param<T> gamma, beta;

 private:
  int groups_, ch_;
  T eps_;
  Tensor<T> xhat_, inv_;
};

// Normalizes the last dimension of token tensors (..., D).
template <typename T>
class LayerNorm {
 public:
  LayerNorm(const std::string& name, int dim, T eps = T(1e-5))
      : d_(dim), eps_(eps) {
    gamma = Param<T>(name + ".g", {dim});
    beta = Param<T>(name + ".b", {dim});
    gamma.w.fill(T(1));
  }

  void collect(ParamSet<T>& ps) {
    ps.add(&gamma);
    ps.add(&beta);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    const int rows = static_cast<int>(x.numel() / d_);
    xhat_ = Tensor<T>({rows, d_});
    inv_ = Tensor<T>({rows});
    Tensor<T> y({rows, d_});
    const T* xp = x.data();
    for (int r = 0; r < rows; ++r, xp += d_) {
      T mu = kern::Kern<T>::sum(xp, static_cast<size_t>(d_)) / T(d_);
      T var = T(0);
      for (int i = 0; i < d_; ++i) {
        const T dv = xp[i] - mu;
        var += dv * dv;
      }
      var /= T(d_);
      const T inv = T(1) / std::sqrt(var + eps_);
      inv_[r] = inv;
      T* xh = xhat_.data() + static_cast<size_t>(r) * d_;
      T* yp = y.data() + static_cast<size_t>(r) * d_;
      for (int i = 0; i < d_; ++i) {
        xh[i] = (xp[i] - mu) * inv;
        yp[i] = gamma.w[i] * xh[i] + beta.w[i];
      }
    }
    return y.reshaped(x.shape());
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const int rows = static_cast<int>(gy.numel() / d_);
    Tensor<T> gx({rows, d_});
    const T* gp = gy.data();
    for (int r = 0; r < rows; ++r, gp += d_) {
      const T* xh = xhat_.data() + static_cast<size_t>(r) * d_;
      T* gxp = gx.data() + static_cast<size_t>(r) * d_;
      T s1 = T(0), s2 = T(0);
      for (int i = 0; i < d_; ++i) {
        const T dxh = gp[i] * gamma.w[i];
        s1 += dxh;
        s2 += dxh * xh[i];
        if (gamma.trainable || beta.trainable) {
          gamma.g[i] += gp[i] * xh[i];
          beta.g[i] += gp[i];
        }
      }
      s1 /= T(d_);
      s2 /= T(d_);
      const T inv = inv_[r];
      for (int i = 0; i < d_; ++i) {
        const T dxh = gp[i] * gamma.w[i];
        gxp[i] = inv * (dxh - s1 - xh[i] * s2);
      }
    }
    return gx.reshaped(gy.shape());
  }

  Param<T> gamma, beta;

 private:
  int d_;
  T eps_;
  Tensor<T> xhat_, inv_;
};

template <typename T>
class SiLU {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    Tensor<T> y(x.shape());
    kern::Kern<T>::silu(x.data(), y.data(), static_cast<size_t>(x.numel()));
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(gy.shape());
    kern::Kern<T>::silu_bwd(x_.data(), gy.data(), gx.data(),
                            static_cast<size_t>(gy.numel()));
    return gx;
  }

 private:
  Tensor<T> x_;
};

template <typename T>
class Tanh {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    y_ = apply(x);
    return y_;
  }
  static Tensor<T> apply(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(gy.shape());
    for (int64_t i = 0; i < gy.numel(); ++i)
      gx[i] = gy[i] * (T(1) - y_[i] * y_[i]);
    return gx;
  }

 private:
  Tensor<T> y_;
};

template <typename T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    y_ = apply(x);
    return y_;
  }
  static Tensor<T> apply(const Tensor<T>& x) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i)
      y[i] = T(1) / (T(1) + std::exp(-x[i]));
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(gy.shape());
    for (int64_t i = 0; i < gy.numel(); ++i)
      gx[i] = gy[i] * y_[i] * (T(1) - y_[i]);
    return gx;
  }

 private:
  Tensor<T> y_;
};

// Nearest-neighbor 2x upsampling of (B,C,H,W).
template <typename T>
class Upsample2x {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    in_shape_ = x.shape();
    return apply(x);
  }
  Tensor<T> apply(const Tensor<T>& x) const {
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor<T> y({B, C, 2 * H, 2 * W});
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < 2 * H; ++i)
          for (int j = 0; j < 2 * W; ++j)
            y.at(b, c, i, j) = x.at(b, c, i / 2, j / 2);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx(in_shape_);
    const int B = gx.dim(0), C = gx.dim(1), H = gx.dim(2), W = gx.dim(3);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < 2 * H; ++i)
          for (int j = 0; j < 2 * W; ++j)
            gx.at(b, c, i / 2, j / 2) += gy.at(b, c, i, j);
    return gx;
  }

 private:
  std::vector<int> in_shape_;
};

template <typename T>
class Embedding {
 public:
  Embedding(const std::string& name, int num, int dim) : num_(num), dim_(dim) {
    table = Param<T>(name + ".w", {num, dim});
  }

  void init(Rng& rng) {
    rng.fill_normal(table.w.data(), table.w.numel(), T(0), T(0.1));
  }

  void collect(ParamSet<T>& ps) { ps.add(&table); }

  void copy_row(int idx, T* dst) const {
    if (idx < 0 || idx >= num_) throw std::out_of_range("Embedding: bad index");
    const T* src = table.w.data() + static_cast<size_t>(idx) * dim_;
    for (int i = 0; i < dim_; ++i) dst[i] = src[i];
  }

  void add_row_grad(int idx, const T* g) {
    if (!table.trainable) return;
    T* dst = table.g.data() + static_cast<size_t>(idx) * dim_;
    for (int i = 0; i < dim_; ++i) dst[i] += g[i];
  }

  int dim() const { return dim_; }

  Param<T> table;

 private:
  int num_, dim_;
};

// Layout shuffles between conv maps and attention tokens.
template <typename T>
Tensor<T> nchw_to_tokens(const Tensor<T>& x) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<T> t({B, H * W, C});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H * W; ++i)
        t.at(b, i, c) = x[(static_cast<size_t>(b) * C + c) * H * W + i];
  return t;
}

template <typename T>
Tensor<T> tokens_to_nchw(const Tensor<T>& t, int H, int W) {
  const int B = t.dim(0), C = t.dim(2);
  Tensor<T> x({B, C, H, W});
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H * W; ++i)
        x[(static_cast<size_t>(b) * C + c) * H * W + i] = t.at(b, i, c);
  return x;
}

// (F,C,H,W) -> (H*W, F, C): one token sequence per spatial cell, across frames.
template <typename T>
Tensor<T> nchw_to_framewise_tokens(const Tensor<T>& x) {
  const int F = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<T> t({H * W, F, C});
  for (int f = 0; f < F; ++f)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H * W; ++i)
        t.at(i, f, c) = x[(static_cast<size_t>(f) * C + c) * H * W + i];
  return t;
}

template <typename T>
Tensor<T> framewise_tokens_to_nchw(const Tensor<T>& t, int H, int W) {
  const int F = t.dim(1), C = t.dim(2);
  Tensor<T> x({F, C, H, W});
  for (int f = 0; f < F; ++f)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < H * W; ++i)
        x[(static_cast<size_t>(f) * C + c) * H * W + i] = t.at(i, f, c);
  return x;
}

}  // namespace lomo::nn
