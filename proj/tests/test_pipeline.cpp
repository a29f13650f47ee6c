#include <memory>
#include <vector>

#include "doctest.h"
#include "lomo/core/image.hpp"
#include "lomo/core/rng.hpp"
#include "lomo/eval/metrics.hpp"
#include "lomo/pipeline/transfer.hpp"
#include "support.hpp"

using namespace lomo;
using namespace lomo::pipeline;
using doctest::Approx;
using doctest::Contains;

namespace {

synth::VideoClip make_clip(synth::BodyShape shape, synth::Preset preset,
                           int size, int frames, uint64_t seed) {
  const auto spec = synth::default_spec(shape, size);
  const auto script =
      synth::make_script(preset, frames, synth::limb_count(shape), seed);
  return synth::generate_sprite_video(spec, script, seed + 1);
}

// Untrained but seeded-random models over 32px clips (4x4 latents), with a
// short 50-step schedule so the inversion depth stays mild.
struct Rig {
  synth::VideoClip source, driving;
  codec::Codec codec{32};
  std::unique_ptr<flow::LOFNet> lofnet;
  std::unique_ptr<diffusion::UNet<float>> net;
  diffusion::NoiseSchedule s = diffusion::make_schedule(50, 1e-4f, 2e-2f);

  Rig() {
    source = make_clip(synth::BodyShape::biped, synth::Preset::walk, 32, 3,
                       101);
    driving = make_clip(synth::BodyShape::biped, synth::Preset::jump, 32, 3,
                        202);

    Rng rng(7);
    codec.init(rng);

    lofnet = std::make_unique<flow::LOFNet>(4, source.keypoints[0].k(), 0.1f,
                                            16);
    for (auto* p : lofnet->params().items())
      testutil::fill_random(p->w, rng, -0.3f, 0.3f);

    diffusion::UNetConfig ucfg;
    ucfg.width = 8;
    ucfg.heads = 2;
    ucfg.groups = 2;
    ucfg.time_dim = 8;
    ucfg.cond_dim = 6;
    ucfg.frames = 3;
    net = std::make_unique<diffusion::UNet<float>>(ucfg);
    for (auto* p : net->params().items())
      testutil::fill_random(p->w, rng, -0.2f, 0.2f);
  }

  TransferResult run(const TransferConfig& cfg) {
    return transfer(source, driving, codec, *lofnet, *net, s, cfg);
  }
};

TransferConfig small_cfg() {
  TransferConfig cfg;
  cfg.t_inv = 40;
  cfg.steps = 8;
  cfg.gamma = 0.1f;
  cfg.seed = 11;
  return cfg;
}

bool same_frames(const synth::VideoClip& a, const synth::VideoClip& b) {
  if (a.frames.size() != b.frames.size()) return false;
  for (size_t i = 0; i < a.frames.size(); ++i)
    if (!testutil::bitwise_equal(a.frames[i], b.frames[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("transfer produces one output frame per driving frame") {
  Rig rig;
  const TransferResult res = rig.run(small_cfg());

  REQUIRE(res.output.frames.size() == 3);
  REQUIRE(res.adapted.size() == 3);
  REQUIRE(res.flows.size() == 3);
  CHECK(!res.single_frame);

  CHECK(res.warped_noisy.shape() == std::vector<int>{3, 4, 4, 4});
  for (const auto& f : res.output.frames) {
    REQUIRE(f.shape() == std::vector<int>{3, 32, 32});
    for (int64_t i = 0; i < f.numel(); ++i) {
      CHECK(f.data()[i] >= 0.f);
      CHECK(f.data()[i] <= 1.f);
    }
  }
  for (const auto& fl : res.flows)
    CHECK(fl.d.shape() == std::vector<int>{2, 4, 4});

  CHECK(res.output.label == rig.source.label);
  CHECK(res.output.preset_name == rig.driving.preset_name);
  CHECK(res.output.fps == rig.driving.fps);
  REQUIRE(res.output.keypoints.size() == 3);

  // Zero relative driving displacement at frame 0 leaves the source pose.
  const auto& p0 = res.adapted[0].positions;
  const auto& ps = rig.source.keypoints[0].positions;
  REQUIRE(p0.shape() == ps.shape());
  for (int64_t i = 0; i < p0.numel(); ++i)
    CHECK(p0.data()[i] == Approx(ps.data()[i]).epsilon(1e-5));
}

TEST_CASE("the same seed reproduces a transfer bit for bit") {
  Rig rig;
  const TransferConfig cfg = small_cfg();
  const TransferResult a = rig.run(cfg);
  const TransferResult b = rig.run(cfg);
  CHECK(same_frames(a.output, b.output));
  CHECK(testutil::bitwise_equal(a.warped_noisy, b.warped_noisy));

  TransferConfig other = cfg;
  other.seed = 12;
  const TransferResult c = rig.run(other);
  CHECK(!same_frames(a.output, c.output));
}

TEST_CASE("with gamma zero the seed does not matter") {
  Rig rig;
  TransferConfig cfg = small_cfg();
  cfg.gamma = 0.f;
  cfg.seed = 1;
  const TransferResult a = rig.run(cfg);
  cfg.seed = 2;
  const TransferResult b = rig.run(cfg);
  CHECK(same_frames(a.output, b.output));
  CHECK(testutil::bitwise_equal(a.warped_noisy, b.warped_noisy));
}

TEST_CASE("histogram matching pins output colors to the source") {
  Rig rig;
  TransferConfig cfg = small_cfg();
  cfg.gamma = 0.f;

  const TransferResult matched = rig.run(cfg);
  const Tensor<float> ref =
      img::quantize8(rig.codec.decode(rig.codec.encode(rig.source.frames[0])));

  // Matching rewrites each frame's pixel multiset to the reference's, and
  // the 8-bit quantizer maps equal multisets to equal histograms.
  CHECK(eval::identity_proxy(matched.output.frames, ref) == 0.0);

  cfg.hist_match = false;
  const TransferResult raw = rig.run(cfg);
  CHECK(!same_frames(matched.output, raw.output));
}

TEST_CASE("single-frame sources are flagged and enforced") {
  Rig rig;
  synth::VideoClip one = rig.source;
  one.frames.resize(1);
  one.keypoints.resize(1);

  const TransferResult res = single_frame_transfer(
      one, rig.driving, rig.codec, *rig.lofnet, *rig.net, rig.s, small_cfg());
  CHECK(res.single_frame);
  CHECK(res.output.frames.size() == 3);

  CHECK_THROWS_WITH_AS(
      single_frame_transfer(rig.source, rig.driving, rig.codec, *rig.lofnet,
                            *rig.net, rig.s, small_cfg()),
      Contains("exactly one frame"), std::invalid_argument);
}

TEST_CASE("bad configurations and mismatched models are rejected") {
  Rig rig;

  TransferConfig cfg = small_cfg();
  cfg.t_inv = -1;
  CHECK_THROWS_WITH_AS(rig.run(cfg), Contains("t_inv"), std::invalid_argument);
  cfg.t_inv = 50;
  CHECK_THROWS_WITH_AS(rig.run(cfg), Contains("t_inv"), std::invalid_argument);

  cfg = small_cfg();
  cfg.gamma = -0.1f;
  CHECK_THROWS_WITH_AS(rig.run(cfg), Contains("gamma"), std::invalid_argument);

  cfg = small_cfg();
  cfg.steps = 0;
  CHECK_THROWS_WITH_AS(rig.run(cfg), Contains("steps"), std::invalid_argument);

  const TransferConfig ok = small_cfg();
  synth::VideoClip empty;
  CHECK_THROWS_WITH_AS(transfer(empty, rig.driving, rig.codec, *rig.lofnet,
                                *rig.net, rig.s, ok),
                       Contains("empty clip"), std::invalid_argument);

  synth::VideoClip bare = rig.source;
  bare.keypoints.clear();
  CHECK_THROWS_WITH_AS(transfer(bare, rig.driving, rig.codec, *rig.lofnet,
                                *rig.net, rig.s, ok),
                       Contains("need keypoints"), std::invalid_argument);

  const synth::VideoClip tiny =
      make_clip(synth::BodyShape::biped, synth::Preset::walk, 16, 3, 303);
  CHECK_THROWS_WITH_AS(transfer(tiny, rig.driving, rig.codec, *rig.lofnet,
                                *rig.net, rig.s, ok),
                       Contains("does not match codec"), std::invalid_argument);

  flow::LOFNet wide_grid(8, rig.source.keypoints[0].k(), 0.1f, 16);
  CHECK_THROWS_WITH_AS(transfer(rig.source, rig.driving, rig.codec, wide_grid,
                                *rig.net, rig.s, ok),
                       Contains("flow grid"), std::invalid_argument);

  flow::LOFNet extra_kp(4, rig.source.keypoints[0].k() + 1, 0.1f, 16);
  CHECK_THROWS_WITH_AS(transfer(rig.source, rig.driving, rig.codec, extra_kp,
                                *rig.net, rig.s, ok),
                       Contains("keypoint count"), std::invalid_argument);
}
