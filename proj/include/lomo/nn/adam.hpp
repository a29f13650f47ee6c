#pragma once

#include <cmath>
#include <vector>

#include "lomo/core/kernels.hpp"
#include "lomo/nn/params.hpp"

namespace lomo::nn {

// Adam with bias correction, applied to the trainable subset of a ParamSet.
// Moment slots are keyed by position, so the set must not be reordered
// between steps.
template <typename T>
class AdamOpt {
 public:
  explicit AdamOpt(T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamSet<T>& ps) {
    if (m_.empty()) {
      m_.resize(ps.size());
      v_.resize(ps.size());
      for (size_t i = 0; i < ps.size(); ++i) {
        m_[i] = Tensor<T>(ps[i]->w.shape());
        v_[i] = Tensor<T>(ps[i]->w.shape());
      }
    }
    ++t_;
    const T c1 = T(1) / (T(1) - std::pow(beta1_, T(t_)));
    const T c2 = T(1) / (T(1) - std::pow(beta2_, T(t_)));
    for (size_t i = 0; i < ps.size(); ++i) {
      Param<T>* p = ps[i];
      if (!p->trainable) continue;
      kern::Kern<T>::adam(p->w.data(), p->g.data(), m_[i].data(), v_[i].data(),
                          static_cast<size_t>(p->w.numel()), lr_, beta1_,
                          beta2_, eps_, c1, c2);
    }
  }

  void set_lr(T lr) { lr_ = lr; }
  int steps_taken() const { return t_; }

 private:
  T lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace lomo::nn
