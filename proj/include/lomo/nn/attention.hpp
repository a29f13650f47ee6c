#pragma once

#include <cmath>
#include <stdexcept>

#include "lomo/nn/layers.hpp"

namespace lomo::nn {

// Multi-head scaled dot-product attention over (B, S, D) tokens. Queries
// always come from x; keys and values come from x (self) or a context
// sequence (cross). Head slices are addressed through gemm leading
// dimensions, so tokens are never repacked per head.
template <typename T>
class MultiHeadAttention {
 public:
  MultiHeadAttention(const std::string& name, int dim, int heads)
      : q_proj(name + ".q", dim, dim), k_proj(name + ".k", dim, dim),
        v_proj(name + ".v", dim, dim), out_proj(name + ".o", dim, dim),
        d_(dim), h_(heads), dh_(dim / heads) {
    if (dim % heads != 0)
      throw std::invalid_argument("MultiHeadAttention: dim % heads != 0");
  }

  void init(Rng& rng) {
    q_proj.init(rng);
    k_proj.init(rng);
    v_proj.init(rng);
    out_proj.init(rng);
  }

  void collect(ParamSet<T>& ps) {
    q_proj.collect(ps);
    k_proj.collect(ps);
    v_proj.collect(ps);
    out_proj.collect(ps);
  }

  void add_lora(int rank, T alpha, Rng& rng) {
    q_proj.add_lora(rank, alpha, rng);
    k_proj.add_lora(rank, alpha, rng);
    v_proj.add_lora(rank, alpha, rng);
    out_proj.add_lora(rank, alpha, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) { return forward_impl(x, x, true); }
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& ctx) {
    return forward_impl(x, ctx, false);
  }

  // Self-attention: input gradient only.
  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> unused;
    return backward_impl(gy, &unused);
  }
  // Cross-attention: context gradient is accumulated into gctx.
  Tensor<T> backward(const Tensor<T>& gy, Tensor<T>& gctx) {
    return backward_impl(gy, &gctx);
  }

  Linear<T> q_proj, k_proj, v_proj, out_proj;

 private:
  Tensor<T> forward_impl(const Tensor<T>& x, const Tensor<T>& kv, bool self) {
    self_ = self;
    B_ = x.dim(0);
    S_ = x.dim(1);
    Skv_ = kv.dim(1);
    q_ = q_proj.forward(x);
    k_ = k_proj.forward(kv);
    v_ = v_proj.forward(kv);
    probs_ = Tensor<T>({B_, h_, S_, Skv_});
    Tensor<T> attn({B_, S_, d_});
    const T inv = T(1) / std::sqrt(T(dh_));
    for (int b = 0; b < B_; ++b)
      for (int h = 0; h < h_; ++h) {
        const T* Q = q_.data() + head_off(b, S_, h);
        const T* K = k_.data() + head_off(b, Skv_, h);
        const T* V = v_.data() + head_off(b, Skv_, h);
        T* P = probs_.data() + ((static_cast<size_t>(b) * h_ + h) * S_) * Skv_;
        kern::Kern<T>::gemm_nt(S_, Skv_, dh_, inv, Q, d_, K, d_, T(0), P, Skv_);
        kern::Kern<T>::softmax_rows(P, S_, Skv_);
        T* O = attn.data() + head_off(b, S_, h);
        kern::Kern<T>::gemm_nn(S_, dh_, Skv_, T(1), P, Skv_, V, d_, T(0), O, d_);
      }
    return out_proj.forward(attn);
  }

  Tensor<T> backward_impl(const Tensor<T>& gy, Tensor<T>* gctx) {
    Tensor<T> gO = out_proj.backward(gy);
    Tensor<T> gq({B_, S_, d_});
    Tensor<T> gk({B_, Skv_, d_});
    Tensor<T> gv({B_, Skv_, d_});
    Tensor<T> gP({S_, Skv_});
    const T inv = T(1) / std::sqrt(T(dh_));
    for (int b = 0; b < B_; ++b)
      for (int h = 0; h < h_; ++h) {
        const T* Q = q_.data() + head_off(b, S_, h);
        const T* K = k_.data() + head_off(b, Skv_, h);
        const T* V = v_.data() + head_off(b, Skv_, h);
        const T* P = probs_.data() + ((static_cast<size_t>(b) * h_ + h) * S_) * Skv_;
        const T* gOp = gO.data() + head_off(b, S_, h);

        kern::Kern<T>::gemm_nt(S_, Skv_, dh_, T(1), gOp, d_, V, d_, T(0),
                               gP.data(), Skv_);
        // gV_h = P^T gO_h
        Tensor<T> Pt({Skv_, S_});
        kern::ref::transpose(P, S_, Skv_, Pt.data());
        kern::Kern<T>::gemm_nn(Skv_, dh_, S_, T(1), Pt.data(), S_, gOp, d_,
                               T(0), gv.data() + head_off(b, Skv_, h), d_);
        // Softmax backward in place: gS = P * (gP - rowdot(gP, P)).
        for (int s = 0; s < S_; ++s) {
          T* gr = gP.data() + static_cast<size_t>(s) * Skv_;
          const T* pr = P + static_cast<size_t>(s) * Skv_;
          const T rd = kern::Kern<T>::dot(gr, pr, static_cast<size_t>(Skv_));
          for (int j = 0; j < Skv_; ++j) gr[j] = pr[j] * (gr[j] - rd);
        }
        kern::Kern<T>::gemm_nn(S_, dh_, Skv_, inv, gP.data(), Skv_, K, d_,
                               T(0), gq.data() + head_off(b, S_, h), d_);
        Tensor<T> gSt({Skv_, S_});
        kern::ref::transpose(gP.data(), S_, Skv_, gSt.data());
        kern::Kern<T>::gemm_nn(Skv_, dh_, S_, inv, gSt.data(), S_, Q, d_,
                               T(0), gk.data() + head_off(b, Skv_, h), d_);
      }
    Tensor<T> gx = q_proj.backward(gq);
    Tensor<T> gk_in = k_proj.backward(gk);
    Tensor<T> gv_in = v_proj.backward(gv);
    if (self_) {
      kern::Kern<T>::add(gx.data(), gk_in.data(), gx.data(),
                         static_cast<size_t>(gx.numel()));
      kern::Kern<T>::add(gx.data(), gv_in.data(), gx.data(),
                         static_cast<size_t>(gx.numel()));
    } else {
      if (gctx->numel() != gk_in.numel())
        *gctx = Tensor<T>(gk_in.shape());
      kern::Kern<T>::add(gctx->data(), gk_in.data(), gctx->data(),
                         static_cast<size_t>(gk_in.numel()));
      kern::Kern<T>::add(gctx->data(), gv_in.data(), gctx->data(),
                         static_cast<size_t>(gv_in.numel()));
    }
    return gx;
  }

  size_t head_off(int b, int S, int h) const {
    return static_cast<size_t>(b) * S * d_ + static_cast<size_t>(h) * dh_;
  }

  int d_, h_, dh_;
  bool self_ = true;
  int B_ = 0, S_ = 0, Skv_ = 0;
  Tensor<T> q_, k_, v_, probs_;
};

template <typename T>
class FeedForward {
 public:
  FeedForward(const std::string& name, int dim, int mult = 2)
      : fc1(name + ".fc1", dim, mult * dim), fc2(name + ".fc2", mult * dim, dim) {}

  void init(Rng& rng) {
    fc1.init(rng);
    fc2.init(rng);
  }
  void collect(ParamSet<T>& ps) {
    fc1.collect(ps);
    fc2.collect(ps);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    return fc2.forward(act_.forward(fc1.forward(x)));
  }
  Tensor<T> backward(const Tensor<T>& gy) {
    return fc1.backward(act_.backward(fc2.backward(gy)));
  }

  Linear<T> fc1, fc2;

 private:
  SiLU<T> act_;
};

}  // namespace lomo::nn
