#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "doctest.h"
#include "lomo/core/serialize.hpp"
#include "lomo/diffusion/train.hpp"
#include "lomo/finetune/lora.hpp"
#include "lomo/nn/adam.hpp"
#include "support.hpp"

using namespace lomo;
using namespace lomo::finetune;
using diffusion::UNet;
using diffusion::UNetConfig;
using doctest::Contains;

namespace {

UNetConfig tiny_cfg() {
  UNetConfig cfg;
  cfg.width = 8;
  cfg.heads = 2;
  cfg.groups = 2;
  cfg.time_dim = 8;
  cfg.cond_dim = 6;
  cfg.num_classes = 3;
  cfg.frames = 2;
  return cfg;
}

// Builds a net whose weights depend only on the seed, so two calls with the
// same seed produce bit-identical bases.
std::unique_ptr<UNet<float>> tiny_net(uint64_t seed) {
  auto net = std::make_unique<UNet<float>>(tiny_cfg());
  Rng rng(seed);
  net->init(rng);
  for (auto* p : net->params().items())
    testutil::fill_random(p->w, rng, -0.2f, 0.2f);
  return net;
}

Tensor<float> probe_latent(uint64_t seed) {
  Tensor<float> z({2, 4, 4, 4});
  Rng rng(seed);
  testutil::fill_random(z, rng);
  return z;
}

}  // namespace

TEST_CASE("a fresh adapter is an exact no-op on the model output") {
  auto net = tiny_net(1);
  const Tensor<float> z = probe_latent(2);
  const Tensor<float> before = net->forward(z, 10, 1);

  Rng rng(3);
  attach_lora(*net, 2, 4.0f, rng);
  const Tensor<float> after = net->forward(z, 10, 1);
  CHECK(testutil::bitwise_equal(before, after));
}

TEST_CASE("adapters cover every attention projection and nothing else") {
  auto net = tiny_net(4);
  Rng rng(5);
  attach_lora(*net, 2, 4.0f, rng);

  const auto names = lora_param_names(net->params());
  // 3 transformer blocks x 3 attention modules x 4 projections x (A, B).
  CHECK(names.size() == 72);
  for (const auto& n : names) {
    const bool a = n.find(".lora_a") != std::string::npos;
    const bool b = n.find(".lora_b") != std::string::npos;
    CHECK((a || b));
  }
  for (const auto* p : net->params().items())
    CHECK(p->trainable == is_lora_param(p->name));
}

TEST_CASE("rank limits and double attachment are rejected") {
  auto net = tiny_net(6);
  Rng rng(7);
  CHECK_THROWS_WITH_AS(attach_lora(*net, 0, 4.0f, rng),
                       Contains("rank must be >= 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(attach_lora(*net, 9, 4.0f, rng),
                       Contains("exceeds the smallest target layer"),
                       std::invalid_argument);
  attach_lora(*net, 2, 4.0f, rng);
  CHECK_THROWS_WITH_AS(attach_lora(*net, 2, 4.0f, rng),
                       Contains("already attached"), std::logic_error);
}

TEST_CASE("the bypass adds alpha-over-rank scaled low-rank corrections") {
  nn::Linear<float> lin("lin", 4, 3);
  Rng rng(8);
  lin.init(rng);

  Tensor<float> x({2, 4});
  testutil::fill_random(x, rng);
  const Tensor<float> y0 = lin.forward(x);

  lin.add_lora(2, 3.0f, rng);
  CHECK(testutil::bitwise_equal(lin.forward(x), y0));

  testutil::fill_random(lin.lora_b.w, rng, -0.4f, 0.4f);
  const Tensor<float> y1 = lin.forward(x);
  const float scale = 3.0f / 2.0f;
  for (int r = 0; r < 2; ++r)
    for (int o = 0; o < 3; ++o) {
      double want = y0.at(r, o);
      for (int k = 0; k < 2; ++k) {
        double u = 0;
        for (int i = 0; i < 4; ++i)
          u += double(x.at(r, i)) * lin.lora_a.w.at(k, i);
        want += double(scale) * u * lin.lora_b.w.at(o, k);
      }
      CHECK(std::abs(double(y1.at(r, o)) - want) < 1e-5);
    }
}

TEST_CASE("optimizer steps move only the adapter factors") {
  auto net = tiny_net(9);
  Rng rng(10);
  attach_lora(*net, 2, 4.0f, rng);

  std::vector<std::pair<std::string, Tensor<float>>> snapshot;
  for (const auto* p : net->params().items())
    snapshot.emplace_back(p->name, p->w.clone());
  const uint64_t fp0 = base_fingerprint(net->params());

  const auto s = diffusion::make_schedule();
  const Tensor<float> z0 = probe_latent(11);
  nn::AdamOpt<float> opt(1e-3f);
  Rng lrng(12);
  // Two steps: the first can only move B (A's gradient is zero while B is),
  // the second moves A through the now-nonzero B.
  for (int step = 0; step < 2; ++step) {
    net->params().zero_grad();
    diffusion::denoise_loss(*net, z0, 1, 100, 900, s, lrng, true);
    opt.step(net->params());
  }

  bool a_moved = false, b_moved = false;
  size_t i = 0;
  for (const auto* p : net->params().items()) {
    const auto& [name, before] = snapshot[i++];
    REQUIRE(name == p->name);
    const bool same = testutil::bitwise_equal(p->w, before);
    if (!is_lora_param(p->name)) {
      CHECK(same);
      continue;
    }
    if (!same && p->name.find(".lora_a") != std::string::npos) a_moved = true;
    if (!same && p->name.find(".lora_b") != std::string::npos) b_moved = true;
  }
  CHECK(b_moved);
  CHECK(a_moved);
  CHECK(base_fingerprint(net->params()) == fp0);
}

TEST_CASE("the fingerprint tracks the frozen base and ignores adapters") {
  auto net = tiny_net(13);
  const uint64_t fp0 = base_fingerprint(net->params());

  Rng rng(14);
  attach_lora(*net, 2, 4.0f, rng);
  CHECK(base_fingerprint(net->params()) == fp0);

  for (auto* p : net->params().items())
    if (is_lora_param(p->name)) testutil::fill_random(p->w, rng, -0.1f, 0.1f);
  CHECK(base_fingerprint(net->params()) == fp0);

  nn::Param<float>* w = net->params().find("unet.conv_in.w");
  REQUIRE(w != nullptr);
  w->w.data()[0] += 0.5f;
  CHECK(base_fingerprint(net->params()) != fp0);
}

TEST_CASE("adapter checkpoints round-trip onto an identical base") {
  const auto dir = testutil::scratch_dir("lora_ckpt");
  const std::string path = dir + "/adapter.bin";

  auto a = tiny_net(15);
  Rng rng(16);
  attach_lora(*a, 2, 3.0f, rng);
  for (auto* p : a->params().items())
    if (is_lora_param(p->name)) testutil::fill_random(p->w, rng, -0.2f, 0.2f);
  save_adapter(*a, 2, 3.0f, {{"note", "probe"}}, path);

  auto b = tiny_net(15);
  const auto meta = load_adapter(*b, path);
  CHECK(meta.at("rank").get<int>() == 2);
  CHECK(meta.at("alpha").get<float>() == 3.0f);
  CHECK(meta.at("note").get<std::string>() == "probe");
  CHECK(meta.at("base_fingerprint").get<std::string>().size() == 16);

  for (const auto* p : a->params().items())
    if (is_lora_param(p->name)) {
      const nn::Param<float>* q = b->params().find(p->name);
      REQUIRE(q != nullptr);
      CHECK(testutil::bitwise_equal(p->w, q->w));
    }

  const Tensor<float> z = probe_latent(17);
  CHECK(testutil::bitwise_equal(a->forward(z, 5, 0), b->forward(z, 5, 0)));
}

TEST_CASE("an adapter refuses to load onto a different base") {
  const auto dir = testutil::scratch_dir("lora_mismatch");
  const std::string path = dir + "/adapter.bin";

  auto a = tiny_net(18);
  Rng rng(19);
  attach_lora(*a, 2, 3.0f, rng);
  save_adapter(*a, 2, 3.0f, {}, path);

  auto other = tiny_net(99);
  CHECK_THROWS_WITH_AS(load_adapter(*other, path),
                       Contains("different base model"), std::runtime_error);
}

TEST_CASE("corrupted adapter archives are rejected with the tensor name") {
  const auto dir = testutil::scratch_dir("lora_corrupt");
  const std::string path = dir + "/adapter.bin";

  auto a = tiny_net(20);
  Rng rng(21);
  attach_lora(*a, 2, 3.0f, rng);
  save_adapter(*a, 2, 3.0f, {}, path);

  SUBCASE("missing tensor") {
    ser::Container c = ser::load(path);
    const std::string victim = c.tensors.front().first;
    c.tensors.erase(c.tensors.begin());
    const std::string p2 = dir + "/missing.bin";
    ser::save(p2, c);
    auto b = tiny_net(20);
    CHECK_THROWS_WITH_AS(load_adapter(*b, p2), Contains(victim.c_str()),
                         std::runtime_error);
  }

  SUBCASE("extra tensor") {
    ser::Container c = ser::load(path);
    c.add("unet.zz.w.lora_a", Tensor<float>({2, 8}));
    const std::string p2 = dir + "/extra.bin";
    ser::save(p2, c);
    auto b = tiny_net(20);
    CHECK_THROWS_WITH_AS(load_adapter(*b, p2),
                         Contains("no matching layer"), std::runtime_error);
  }

  SUBCASE("wrong kind") {
    ser::Container c;
    c.meta["kind"] = "codec";
    const std::string p2 = dir + "/kind.bin";
    ser::save(p2, c);
    auto b = tiny_net(20);
    CHECK_THROWS_WITH_AS(load_adapter(*b, p2),
                         Contains("not an adapter checkpoint"),
                         std::runtime_error);
  }
}

TEST_CASE("loading an adapter attaches it when the net has none") {
  const auto dir = testutil::scratch_dir("lora_autoattach");
  const std::string path = dir + "/adapter.bin";

  auto a = tiny_net(22);
  Rng rng(23);
  attach_lora(*a, 4, 4.0f, rng);
  save_adapter(*a, 4, 4.0f, {}, path);

  auto b = tiny_net(22);
  CHECK(lora_param_names(b->params()).empty());
  load_adapter(*b, path);
  CHECK(lora_param_names(b->params()).size() == 72);
  for (const auto* p : b->params().items())
    CHECK(p->trainable == is_lora_param(p->name));
}
