#include "lomo/finetune/finetune.hpp"

#include <stdexcept>

#include "lomo/nn/adam.hpp"

namespace lomo::finetune {

WarpedClip build_warped_clip(
    const flow::LOFNet& lofnet, const Tensor<float>& z_src_frame0,
    const synth::KeypointSet& kp_src_frame0,
    const std::vector<synth::KeypointSet>& kp_drv_seq) {
  const auto adapted = flow::adapt_keypoints(kp_src_frame0, kp_drv_seq);
  const int F = int(adapted.size());
  const int C = z_src_frame0.dim(0), h = z_src_frame0.dim(1),
            w = z_src_frame0.dim(2);
  WarpedClip out;
  out.latents = Tensor<float>({F, C, h, w});
  for (int f = 0; f < F; ++f) {
    const auto res = lofnet.predict(z_src_frame0, kp_src_frame0, adapted[f]);
    Tensor<float> wf = flow::warp(z_src_frame0, res.flow);
    std::copy(wf.data(), wf.data() + wf.numel(),
              out.latents.data() + size_t(f) * C * h * w);
  }
  return out;
}

std::pair<int, int> warp_window_range(WarpWindow w, int T) {
  switch (w) {
    case WarpWindow::w850_1000: return {850 * T / 1000, T};
    case WarpWindow::w900_1000: return {900 * T / 1000, T};
    case WarpWindow::w0_1000: return {0, T};
    case WarpWindow::w400_1000: return {400 * T / 1000, T};
    case WarpWindow::w800_1000: return {800 * T / 1000, T};
    case WarpWindow::none: return {0, 0};
  }
  throw std::logic_error("warp_window_range: bad enum");
}

const char* to_string(WarpWindow w) {
  switch (w) {
    case WarpWindow::w850_1000: return "850-1000";
    case WarpWindow::w900_1000: return "900-1000";
    case WarpWindow::w0_1000: return "0-1000";
    case WarpWindow::w400_1000: return "400-1000";
    case WarpWindow::w800_1000: return "800-1000";
    case WarpWindow::none: return "none";
  }
  throw std::logic_error("to_string: bad WarpWindow");
}

WarpWindow warp_window_from_string(const std::string& s) {
  if (s == "850-1000") return WarpWindow::w850_1000;
  if (s == "900-1000") return WarpWindow::w900_1000;
  if (s == "0-1000") return WarpWindow::w0_1000;
  if (s == "400-1000") return WarpWindow::w400_1000;
  if (s == "800-1000") return WarpWindow::w800_1000;
  if (s == "none") return WarpWindow::none;
  throw std::invalid_argument("unknown warp window: " + s);
}

namespace {

void audit_frozen_grads(const nn::ParamSet<float>& ps) {
  for (const auto* p : ps.items()) {
    if (p->trainable) continue;
    const float* g = p->g.data();
    for (int64_t i = 0; i < p->g.numel(); ++i)
      if (g[i] != 0.0f)
        throw std::logic_error("frozen parameter " + p->name +
                               " received gradient");
  }
}

}  // namespace

FinetuneStats finetune(diffusion::UNet<float>& net,
                       const codec::LatentClip& z_src_clip,
                       const WarpedClip& warped, int cond,
                       const diffusion::NoiseSchedule& s,
                       const FinetuneConfig& cfg) {
  if (cfg.iterations < 0)
    throw std::invalid_argument("finetune: iterations < 0");
  if (cfg.t_source_min < 0 || cfg.t_source_min >= cfg.t_source_max ||
      cfg.t_source_max > s.T)
    throw std::invalid_argument("finetune: bad source timestep range");
  const auto [wmin, wmax] = warp_window_range(cfg.warp_window, s.T);
  const bool use_warp = cfg.warp_window != WarpWindow::none;

  z_src_clip.validate();
  if (use_warp) {
    const auto& wl = warped.latents;
    if (wl.ndim() != 4 || wl.dim(1) != z_src_clip.latents.dim(1) ||
        wl.dim(2) != z_src_clip.latents.dim(2) ||
        wl.dim(3) != z_src_clip.latents.dim(3))
      throw std::invalid_argument(
          "finetune: warped clip geometry " + wl.shape_str() +
          " does not match source " + z_src_clip.latents.shape_str());
  }

  Rng rng(cfg.seed);
  attach_lora(net, cfg.rank, cfg.alpha, rng);
  nn::AdamOpt<float> opt(cfg.lr);

  FinetuneStats stats;
  for (int it = 0; it < cfg.iterations; ++it) {
    net.params().zero_grad();
    auto ds = diffusion::denoise_loss<float>(
        net, z_src_clip.latents, cond, cfg.t_source_min, cfg.t_source_max, s,
        rng, true);
    stats.loss_source.push_back(ds.value);
    if (use_warp) {
      auto dw = diffusion::denoise_loss<float>(net, warped.get(), cond, wmin,
                                               wmax, s, rng, true);
      if (dw.t < wmin || dw.t >= wmax)
        throw std::logic_error("finetune: warp-branch timestep " +
                               std::to_string(dw.t) + " outside window");
      stats.loss_warp.push_back(dw.value);
      stats.warp_draws.push_back(dw.t);
    }
    audit_frozen_grads(net.params());
    opt.step(net.params());
  }
  return stats;
}

}  // namespace lomo::finetune
