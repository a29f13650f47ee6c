#include "lomo/flow/lofnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "lomo/core/serialize.hpp"
#include "lomo/nn/adam.hpp"

namespace lomo::flow {
namespace {

int in_channels(int k) { return k + (k + 1) * codec::kLatentChannels; }

struct CheckpointHead {
  int grid, k, hidden;
  float sigma;
};

CheckpointHead read_head(const std::string& path) {
  ser::Container c = ser::load(path);
  if (c.meta.value("kind", std::string()) != "lofnet")
    throw std::runtime_error("not a lofnet checkpoint: " + path);
  return {c.meta.at("grid").get<int>(), c.meta.at("keypoints").get<int>(),
          c.meta.at("hidden").get<int>(), c.meta.at("sigma").get<float>()};
}

}  // namespace

LOFNet::LOFNet(int grid, int k, float sigma, int hidden)
    : grid_(grid), k_(k), sigma_(sigma), hidden_(hidden),
      c1_("lofnet.c1", in_channels(k), hidden, 3),
      c2_("lofnet.c2", hidden, hidden, 3),
      c3_("lofnet.c3", hidden, hidden, 3),
      c4_("lofnet.c4", hidden, k + 1, 3),
      n1_("lofnet.n1", 8, hidden),
      n2_("lofnet.n2", 8, hidden),
      n3_("lofnet.n3", 8, hidden) {
  if (grid_ < 2) throw std::invalid_argument("LOFNet: grid must be >= 2");
  if (k_ < 1) throw std::invalid_argument("LOFNet: need at least 1 keypoint");
  if (!(sigma_ > 0)) throw std::invalid_argument("LOFNet: sigma must be > 0");
  c1_.collect(params_);
  n1_.collect(params_);
  c2_.collect(params_);
  n2_.collect(params_);
  c3_.collect(params_);
  n3_.collect(params_);
  c4_.collect(params_);
}

LOFNet::LOFNet(const std::string& checkpoint_path)
    : LOFNet(read_head(checkpoint_path).grid, read_head(checkpoint_path).k,
             read_head(checkpoint_path).sigma,
             read_head(checkpoint_path).hidden) {
  ser::Container c = ser::load(checkpoint_path);
  nn::unpack(c, params_);
}

void LOFNet::init(Rng& rng) {
  c1_.init(rng);
  c2_.init(rng);
  c3_.init(rng);
  // The mask head stays zero so an untrained net outputs uniform masks and
  // the flow starts as the mean candidate displacement.
}

Tensor<float> LOFNet::build_input(const Tensor<float>& z_ref,
                                  const synth::KeypointSet& kp_ref,
                                  const synth::KeypointSet& kp_drv,
                                  Tensor<float>& disp) const {
  if (z_ref.ndim() != 3 || z_ref.dim(0) != codec::kLatentChannels ||
      z_ref.dim(1) != grid_ || z_ref.dim(2) != grid_)
    throw std::invalid_argument("LOFNet: latent " + z_ref.shape_str() +
                                " does not match grid " +
                                std::to_string(grid_));
  if (kp_ref.k() != k_ || kp_drv.k() != k_)
    throw std::invalid_argument("LOFNet: expected " + std::to_string(k_) +
                                " keypoints, got " +
                                std::to_string(kp_ref.k()) + "/" +
                                std::to_string(kp_drv.k()));
  const int h = grid_, w = grid_, C = codec::kLatentChannels;
  const Tensor<float> hm_ref = gaussian_heatmaps(kp_ref.positions, h, w, sigma_);
  const Tensor<float> hm_drv = gaussian_heatmaps(kp_drv.positions, h, w, sigma_);
  disp = candidate_displacements(local_affines(kp_ref, kp_drv), h, w);

  Tensor<float> input({1, in_channels(k_), h, w});
  float* ip = input.data();
  for (int k = 0; k < k_; ++k)
    for (int64_t i = 0; i < static_cast<int64_t>(h) * w; ++i)
      *ip++ = hm_drv.data()[k * h * w + i] - hm_ref.data()[k * h * w + i];
  for (int k = 0; k <= k_; ++k) {
    DenseFlow cand(h, w);
    std::copy(disp.data() + static_cast<size_t>(k) * 2 * h * w,
              disp.data() + static_cast<size_t>(k + 1) * 2 * h * w,
              cand.d.data());
    Tensor<float> warped = warp(z_ref, cand);
    ip = std::copy(warped.data(), warped.data() + static_cast<size_t>(C) * h * w, ip);
  }
  return input;
}

LOFNet::Result LOFNet::compose(const Tensor<float>& logits,
                               const Tensor<float>& disp) const {
  const int h = grid_, w = grid_, n = k_ + 1;
  Result r;
  r.mask = Tensor<float>({n, h, w});
  r.flow = DenseFlow(h, w);
  r.flow.d.zero();
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      float mx = logits.at(0, 0, i, j);
      for (int k = 1; k < n; ++k) mx = std::max(mx, logits.at(0, k, i, j));
      float denom = 0;
      for (int k = 0; k < n; ++k) {
        const float e = std::exp(logits.at(0, k, i, j) - mx);
        r.mask.at(k, i, j) = e;
        denom += e;
      }
      for (int k = 0; k < n; ++k) {
        const float m = r.mask.at(k, i, j) / denom;
        r.mask.at(k, i, j) = m;
        r.flow.dx(i, j) += m * disp.at(k, 0, i, j);
        r.flow.dy(i, j) += m * disp.at(k, 1, i, j);
      }
    }
  return r;
}

LOFNet::Result LOFNet::forward(const Tensor<float>& z_ref,
                               const synth::KeypointSet& kp_ref,
                               const synth::KeypointSet& kp_drv) {
  Tensor<float> input = build_input(z_ref, kp_ref, kp_drv, disp_);
  Tensor<float> hgt = a1_.forward(n1_.forward(c1_.forward(input)));
  hgt = a2_.forward(n2_.forward(c2_.forward(hgt)));
  hgt = a3_.forward(n3_.forward(c3_.forward(hgt)));
  Result r = compose(c4_.forward(hgt), disp_);
  mask_ = r.mask;
  return r;
}

void LOFNet::backward(const Tensor<float>& gflow) {
  const int h = grid_, w = grid_, n = k_ + 1;
  Tensor<float> glogits({1, n, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      float dot = 0;
      float gm[64];
      for (int k = 0; k < n; ++k) {
        gm[k] = gflow.at(0, i, j) * disp_.at(k, 0, i, j) +
                gflow.at(1, i, j) * disp_.at(k, 1, i, j);
        dot += gm[k] * mask_.at(k, i, j);
      }
      for (int k = 0; k < n; ++k)
        glogits.at(0, k, i, j) = mask_.at(k, i, j) * (gm[k] - dot);
    }
  Tensor<float> g = c4_.backward(glogits);
  g = c3_.backward(n3_.backward(a3_.backward(g)));
  g = c2_.backward(n2_.backward(a2_.backward(g)));
  c1_.backward(n1_.backward(a1_.backward(g)));
}

LOFNet::Result LOFNet::predict(const Tensor<float>& z_ref,
                               const synth::KeypointSet& kp_ref,
                               const synth::KeypointSet& kp_drv) const {
  Tensor<float> disp;
  Tensor<float> input = build_input(z_ref, kp_ref, kp_drv, disp);
  auto silu_of = [](const Tensor<float>& x) {
    Tensor<float> y(x.shape());
    kern::Kern<float>::silu(x.data(), y.data(), static_cast<size_t>(x.numel()));
    return y;
  };
  Tensor<float> hgt = silu_of(n1_.apply(c1_.apply(input)));
  hgt = silu_of(n2_.apply(c2_.apply(hgt)));
  hgt = silu_of(n3_.apply(c3_.apply(hgt)));
  return compose(c4_.apply(hgt), disp);
}

void LOFNet::save(const std::string& path,
                  const std::vector<float>& loss_history) const {
  ser::Container c = nn::pack(params_);
  c.meta["kind"] = "lofnet";
  c.meta["version"] = 1;
  c.meta["grid"] = grid_;
  c.meta["keypoints"] = k_;
  c.meta["sigma"] = sigma_;
  c.meta["hidden"] = hidden_;
  if (!loss_history.empty()) c.meta["loss_history"] = loss_history;
  ser::save(path, c);
}

LOFNetTrainStats train_lofnet(LOFNet& net,
                              const std::vector<codec::LatentClip>& clips,
                              const LOFNetConfig& cfg) {
  if (net.keypoint_count() + 1 > 64)
    throw std::invalid_argument("train_lofnet: too many candidates");
  std::vector<const codec::LatentClip*> usable;
  for (const auto& c : clips) {
    if (c.frames() >= 2 && static_cast<int>(c.keypoints.size()) == c.frames())
      usable.push_back(&c);
    else
      std::fprintf(stderr,
                   "train_lofnet: skipping clip with %d frames / %zu keypoint "
                   "sets\n",
                   c.frames(), c.keypoints.size());
  }
  if (usable.empty())
    throw std::invalid_argument(
        "train_lofnet: no usable clips (need >= 2 keypointed frames)");

  Rng rng(cfg.seed);
  std::vector<size_t> order(usable.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1],
              order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
  size_t n_hold = std::max<size_t>(
      1, static_cast<size_t>(cfg.holdout_frac * static_cast<float>(usable.size())));
  if (n_hold >= usable.size()) n_hold = usable.size() > 1 ? 1 : 0;
  std::vector<const codec::LatentClip*> hold, train;
  for (size_t i = 0; i < order.size(); ++i)
    (i < n_hold ? hold : train).push_back(usable[order[i]]);
  if (hold.empty()) hold = train;

  auto pair_loss = [&net](const codec::LatentClip& c, int fr, int fd) {
    const Tensor<float> z_ref = c.frame(fr);
    const Tensor<float> z_drv = c.frame(fd);
    const auto r = net.predict(z_ref, c.keypoints[static_cast<size_t>(fr)],
                               c.keypoints[static_cast<size_t>(fd)]);
    return codec::mse(warp(z_ref, r.flow), z_drv);
  };
  auto holdout_loss = [&]() {
    double acc = 0;
    int count = 0;
    for (const auto* c : hold)
      for (int f = 0; f < c->frames(); ++f) {
        acc += pair_loss(*c, f, (f + 1) % c->frames());
        ++count;
      }
    return static_cast<float>(acc / count);
  };

  LOFNetTrainStats stats;
  stats.holdout_initial = holdout_loss();

  nn::AdamOpt<float> opt(cfg.lr);
  for (int it = 0; it < cfg.iters; ++it) {
    const auto& clip =
        *train[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(train.size())))];
    const int F = clip.frames();
    const int fr = rng.uniform_int(0, F);
    int fd = rng.uniform_int(0, F - 1);
    if (fd >= fr) ++fd;  // distinct driving frame
    const Tensor<float> z_ref = clip.frame(fr);
    const Tensor<float> z_drv = clip.frame(fd);
    auto r = net.forward(z_ref, clip.keypoints[static_cast<size_t>(fr)],
                         clip.keypoints[static_cast<size_t>(fd)]);
    Tensor<float> out = warp(z_ref, r.flow);
    Tensor<float> gout(out.shape());
    double loss = 0;
    const float scale = 2.0f / static_cast<float>(out.numel());
    for (int64_t i = 0; i < out.numel(); ++i) {
      const float d = out[i] - z_drv[i];
      loss += static_cast<double>(d) * d;
      gout[i] = scale * d;
    }
    stats.loss.push_back(static_cast<float>(loss / static_cast<double>(out.numel())));
    Tensor<float> gflow = warp_backward_flow(z_ref, r.flow, gout);
    net.params().zero_grad();
    net.backward(gflow);
    opt.step(net.params());
  }

  stats.holdout_final = holdout_loss();
  return stats;
}

}  // namespace lomo::flow
