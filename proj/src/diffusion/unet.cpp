#include "lomo/diffusion/unet.hpp"

#include <fstream>

#include "lomo/core/serialize.hpp"
#include "lomo/nn/params.hpp"

namespace lomo::diffusion {

template class UNet<float>;
template class UNet<double>;

void save_denoiser(const UNet<float>& net, const nlohmann::json& extra_meta,
                   const std::string& path) {
  ser::Container c = nn::pack(net.params());
  const UNetConfig& cfg = net.config();
  c.meta["kind"] = "denoiser";
  c.meta["version"] = 1;
  c.meta["channels"] = cfg.channels;
  c.meta["width"] = cfg.width;
  c.meta["heads"] = cfg.heads;
  c.meta["groups"] = cfg.groups;
  c.meta["time_dim"] = cfg.time_dim;
  c.meta["cond_dim"] = cfg.cond_dim;
  c.meta["num_classes"] = cfg.num_classes;
  c.meta["frames"] = cfg.frames;
  for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it)
    c.meta[it.key()] = it.value();
  ser::save(path, c);
}

std::unique_ptr<UNet<float>> load_denoiser(const std::string& path,
                                           nlohmann::json* meta_out) {
  ser::Container c = ser::load(path);
  if (c.meta.value("kind", "") != "denoiser")
    throw std::runtime_error(path + ": not a denoiser checkpoint");
  UNetConfig cfg;
  try {
    cfg.channels = c.meta.at("channels").get<int>();
    cfg.width = c.meta.at("width").get<int>();
    cfg.heads = c.meta.at("heads").get<int>();
    cfg.groups = c.meta.at("groups").get<int>();
    cfg.time_dim = c.meta.at("time_dim").get<int>();
    cfg.cond_dim = c.meta.at("cond_dim").get<int>();
    cfg.num_classes = c.meta.at("num_classes").get<int>();
    cfg.frames = c.meta.at("frames").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": incomplete denoiser metadata: " +
                             e.what());
  }
  auto net = std::make_unique<UNet<float>>(cfg);
  nn::unpack(c, net->params());
  if (meta_out) *meta_out = c.meta;
  return net;
}

}  // namespace lomo::diffusion
