#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lomo/core/tensor.hpp"

// Checkpoint container: magic + version, a JSON header carrying free-form
// metadata and a tensor index, then raw little-endian f32 payloads.
namespace lomo::ser {

struct Container {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  void add(const std::string& name, const Tensor<float>& t) {
    tensors.emplace_back(name, t);
  }
  const Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

void save(const std::string& path, const Container& c);
Container load(const std::string& path);

constexpr uint64_t kFnvBasis = 14695981039346656037ULL;
uint64_t fnv1a(const void* data, size_t n, uint64_t h = kFnvBasis);
uint64_t file_hash(const std::string& path);

}  // namespace lomo::ser
