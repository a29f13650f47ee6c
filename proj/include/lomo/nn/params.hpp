#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "lomo/core/serialize.hpp"
#include "lomo/core/tensor.hpp"

namespace lomo::nn {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> w, g;
  bool trainable = true;

  Param() = default;
  Param(std::string n, std::vector<int> shape)
      : name(std::move(n)), w(shape), g(std::move(shape)) {}

  void zero_grad() { g.zero(); }
};

// Flat view over the parameters of a model. Layers register their params;
// the optimizer and the checkpoint code iterate the set.
template <typename T>
class ParamSet {
 public:
  void add(Param<T>* p) { items_.push_back(p); }

  std::vector<Param<T>*>& items() { return items_; }
  const std::vector<Param<T>*>& items() const { return items_; }

  size_t size() const { return items_.size(); }
  Param<T>* operator[](size_t i) { return items_[i]; }

  void zero_grad() {
    for (auto* p : items_) p->zero_grad();
  }

  int64_t numel() const {
    int64_t n = 0;
    for (const auto* p : items_) n += p->w.numel();
    return n;
  }

  int64_t trainable_numel() const {
    int64_t n = 0;
    for (const auto* p : items_)
      if (p->trainable) n += p->w.numel();
    return n;
  }

  Param<T>* find(const std::string& name) {
    for (auto* p : items_)
      if (p->name == name) return p;
    return nullptr;
  }

 private:
  std::vector<Param<T>*> items_;
};

inline ser::Container pack(const ParamSet<float>& ps) {
  ser::Container c;
  for (const auto* p : ps.items()) c.add(p->name, p->w);
  return c;
}

// Restores weights by name; every parameter must be present with the exact
// shape the model was built with.
inline void unpack(const ser::Container& c, ParamSet<float>& ps) {
  for (auto* p : ps.items()) {
    const Tensor<float>* t = c.find(p->name);
    if (!t) throw std::runtime_error("checkpoint is missing tensor '" + p->name + "'");
    if (!t->same_shape(p->w))
      throw std::runtime_error("checkpoint tensor '" + p->name + "' has shape " +
                               t->shape_str() + ", model expects " + p->w.shape_str());
    p->w = *t;
  }
}

}  // namespace lomo::nn
