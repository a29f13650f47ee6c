#include "lomo/finetune/lora.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "lomo/core/serialize.hpp"

namespace lomo::finetune {

void attach_lora(diffusion::UNet<float>& net, int rank, float alpha,
                 Rng& rng) {
  if (rank < 1) throw std::invalid_argument("attach_lora: rank must be >= 1");
  if (rank > net.config().width)
    throw std::invalid_argument(
        "attach_lora: rank " + std::to_string(rank) +
        " exceeds the smallest target layer dimension " +
        std::to_string(net.config().width));
  if (!lora_param_names(net.params()).empty())
    throw std::logic_error("attach_lora: adapters already attached");
  net.add_lora(rank, alpha, rng);
  for (auto* p : net.params().items())
    p->trainable = is_lora_param(p->name);
}

bool is_lora_param(const std::string& name) {
  return name.find(".lora_") != std::string::npos;
}

std::vector<std::string> lora_param_names(const nn::ParamSet<float>& ps) {
  std::vector<std::string> out;
  for (const auto* p : ps.items())
    if (is_lora_param(p->name)) out.push_back(p->name);
  return out;
}

uint64_t base_fingerprint(const nn::ParamSet<float>& ps) {
  uint64_t h = ser::kFnvBasis;
  for (const auto* p : ps.items()) {
    if (is_lora_param(p->name)) continue;
    h = ser::fnv1a(p->name.data(), p->name.size(), h);
    h = ser::fnv1a(p->w.data(), p->w.numel() * sizeof(float), h);
  }
  return h;
}

namespace {

// "unet.tb0.self.q.w.lora_a" -> "unet.tb0.self.q"
std::string target_of(const std::string& param_name) {
  const size_t pos = param_name.find(".w.lora_");
  return pos == std::string::npos ? param_name : param_name.substr(0, pos);
}

}  // namespace

void save_adapter(const diffusion::UNet<float>& net, int rank, float alpha,
                  const nlohmann::json& extra_meta, const std::string& path) {
  const auto names = lora_param_names(net.params());
  if (names.empty())
    throw std::logic_error("save_adapter: no adapters attached");

  ser::Container c;
  std::set<std::string> targets;
  for (const auto* p : net.params().items())
    if (is_lora_param(p->name)) {
      c.add(p->name, p->w);
      targets.insert(target_of(p->name));
    }
  c.meta["kind"] = "lora_adapter";
  c.meta["version"] = 1;
  c.meta["rank"] = rank;
  c.meta["alpha"] = alpha;
  c.meta["targets"] = std::vector<std::string>(targets.begin(), targets.end());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                (unsigned long long)base_fingerprint(net.params()));
  c.meta["base_fingerprint"] = std::string(buf);
  for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it)
    c.meta[it.key()] = it.value();
  ser::save(path, c);
}

nlohmann::json load_adapter(diffusion::UNet<float>& net,
                            const std::string& path) {
  ser::Container c = ser::load(path);
  if (c.meta.value("kind", "") != "lora_adapter")
    throw std::runtime_error(path + ": not an adapter checkpoint");
  const int rank = c.meta.at("rank").get<int>();
  const float alpha = c.meta.at("alpha").get<float>();

  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                (unsigned long long)base_fingerprint(net.params()));
  const std::string want = c.meta.value("base_fingerprint", "");
  if (want != buf)
    throw std::runtime_error(
        path + ": adapter was trained on a different base model (base " +
        want + ", this net " + buf + ")");

  if (lora_param_names(net.params()).empty()) {
    Rng scratch(0);
    attach_lora(net, rank, alpha, scratch);
  }

  std::set<std::string> filled;
  for (auto* p : net.params().items()) {
    if (!is_lora_param(p->name)) continue;
    const Tensor<float>* t = c.find(p->name);
    if (!t)
      throw std::runtime_error(path + ": adapter is missing tensor " +
                               p->name);
    if (t->shape() != p->w.shape())
      throw std::runtime_error(path + ": adapter tensor " + p->name +
                               " has shape " + t->shape_str() + ", expected " +
                               p->w.shape_str());
    p->w = *t;
    filled.insert(p->name);
  }
  for (const auto& [name, t] : c.tensors)
    if (!filled.count(name))
      throw std::runtime_error(path + ": adapter tensor " + name +
                               " has no matching layer in this net");
  return c.meta;
}

}  // namespace lomo::finetune
