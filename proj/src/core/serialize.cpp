#include "lomo/core/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace lomo::ser {
namespace {

constexpr char kMagic[8] = {'L', 'O', 'M', 'O', 'T', 'N', 'S', 'R'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, T v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save(const std::string& path, const Container& c) {
  nlohmann::json header;
  header["meta"] = c.meta;
  auto& idx = header["tensors"] = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : c.tensors) {
    idx.push_back({{"name", name},
                   {"shape", t.shape()},
                   {"offset", offset},
                   {"numel", t.numel()}});
    offset += t.numel() * sizeof(float);
  }
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(kMagic, sizeof(kMagic));
  write_pod(f, kVersion);
  write_pod(f, static_cast<uint64_t>(hs.size()));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, t] : c.tensors)
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!f) throw std::runtime_error("write failed: " + path);
}

Container load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::string(magic, 8) != std::string(kMagic, 8))
    throw std::runtime_error("not a checkpoint file: " + path);
  const auto version = read_pod<uint32_t>(f);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path);
  const auto hlen = read_pod<uint64_t>(f);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!f) throw std::runtime_error("truncated header: " + path);
  nlohmann::json header = nlohmann::json::parse(hs);

  Container c;
  c.meta = header.value("meta", nlohmann::json::object());
  uint64_t expect_offset = 0;
  for (const auto& e : header.at("tensors")) {
    const std::string name = e.at("name");
    const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    const uint64_t offset = e.at("offset");
    const uint64_t numel = e.at("numel");
    if (offset != expect_offset)
      throw std::runtime_error("corrupt tensor index in " + path);
    Tensor<float> t(shape);
    if (static_cast<uint64_t>(t.numel()) != numel)
      throw std::runtime_error("shape/numel mismatch for '" + name + "' in " + path);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(numel * sizeof(float)));
    if (!f) throw std::runtime_error("truncated tensor '" + name + "' in " + path);
    c.tensors.emplace_back(name, std::move(t));
    expect_offset += numel * sizeof(float);
  }
  return c;
}

uint64_t fnv1a(const void* data, size_t n, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t file_hash(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof(buf));
    const auto got = f.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace lomo::ser
