#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "lomo/core/image.hpp"
#include "lomo/synth/sprite.hpp"
#include "support.hpp"

using namespace lomo;
using namespace lomo::synth;

namespace {

// Mean pixel position of the pixels closest to a target color.
std::array<double, 2> color_centroid(const Tensor<float>& frame,
                                     const std::array<float, 3>& color,
                                     float max_dist = 0.15f) {
  const int H = frame.dim(1), W = frame.dim(2);
  double sx = 0, sy = 0, n = 0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double d = 0;
      for (int c = 0; c < 3; ++c) {
        const double e = frame.at(c, y, x) - color[c];
        d += e * e;
      }
      if (std::sqrt(d) < max_dist) {
        sx += x;
        sy += y;
        n += 1;
      }
    }
  REQUIRE(n > 0);
  return {sx / n, sy / n};
}

double frob_rel(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  double num = 0, den = 0;
  for (int i = 0; i < 4; ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::sqrt(den);
}

}  // namespace

TEST_CASE("name round-trips and class ids") {
  for (BodyShape s : {BodyShape::quadruped, BodyShape::biped, BodyShape::glyph,
                      BodyShape::flag})
    CHECK(body_shape_from_string(to_string(s)) == s);
  for (Preset p :
       {Preset::walk, Preset::run, Preset::jump, Preset::wave, Preset::idle})
    CHECK(preset_from_string(to_string(p)) == p);
  CHECK_THROWS(body_shape_from_string("octopus"));
  CHECK_THROWS(preset_from_string("moonwalk"));

  std::set<int> ids;
  for (BodyShape s : {BodyShape::quadruped, BodyShape::biped, BodyShape::glyph,
                      BodyShape::flag}) {
    const int id = class_id(s);
    CHECK(id >= 0);
    CHECK(id < num_classes());
    ids.insert(id);
  }
  CHECK(int(ids.size()) == num_classes());
}

TEST_CASE("generated clips carry frames, keypoints and jacobians") {
  auto spec = default_spec(BodyShape::quadruped, 64);
  auto script = make_script(Preset::walk, 10, limb_count(spec.body_shape), 5);
  auto clip = generate_sprite_video(spec, script, 5);

  REQUIRE(int(clip.frames.size()) == 10);
  REQUIRE(clip.has_keypoints());
  REQUIRE(int(clip.keypoints.size()) == 10);
  CHECK(clip.label == "quadruped");
  CHECK(clip.preset_name == "walk");

  for (const auto& f : clip.frames) {
    REQUIRE(f.shape() == std::vector<int>{3, 64, 64});
    CHECK(all_finite(f));
    for (int64_t i = 0; i < f.numel(); ++i) {
      CHECK(f[i] >= 0.0f);
      CHECK(f[i] <= 1.0f);
    }
  }
  for (const auto& kp : clip.keypoints) {
    REQUIRE(kp.k() == kDatasetKeypoints);
    REQUIRE(kp.positions.shape() == std::vector<int>{kDatasetKeypoints, 2});
    REQUIRE(kp.jacobians.shape() == std::vector<int>{kDatasetKeypoints, 2, 2});
    kp.validate();
    for (int k = 0; k < kp.k(); ++k) {
      CHECK(std::abs(kp.positions.at(k, 0)) <= 1.0f);
      CHECK(std::abs(kp.positions.at(k, 1)) <= 1.0f);
    }
  }
}

TEST_CASE("frames are quantized to the 8-bit grid at generation") {
  auto spec = default_spec(BodyShape::biped, 32);
  auto script = make_script(Preset::run, 4, limb_count(spec.body_shape), 9);
  auto clip = generate_sprite_video(spec, script, 9);
  for (const auto& f : clip.frames) {
    CHECK(testutil::bitwise_equal(f, img::quantize8(f)));
    for (int64_t i = 0; i < f.numel(); ++i) {
      const float v = f[i];
      const float snapped = std::round(v * 255.0f) / 255.0f;
      CHECK(v == snapped);
    }
  }
}

TEST_CASE("generation is deterministic in the seed") {
  auto spec = default_spec(BodyShape::glyph, 32);
  auto script = make_script(Preset::wave, 5, limb_count(spec.body_shape), 7);
  auto a = generate_sprite_video(spec, script, 7);
  auto b = generate_sprite_video(spec, script, 7);
  REQUIRE(a.frames.size() == b.frames.size());
  for (size_t i = 0; i < a.frames.size(); ++i)
    CHECK(testutil::bitwise_equal(a.frames[i], b.frames[i]));
  for (size_t i = 0; i < a.keypoints.size(); ++i) {
    CHECK(testutil::bitwise_equal(a.keypoints[i].positions,
                                  b.keypoints[i].positions));
    CHECK(testutil::bitwise_equal(a.keypoints[i].jacobians,
                                  b.keypoints[i].jacobians));
  }

  auto c = generate_sprite_video(spec, script, 8);
  bool any_diff = false;
  for (size_t i = 0; i < a.frames.size() && !any_diff; ++i)
    any_diff = !testutil::bitwise_equal(a.frames[i], c.frames[i]);
  CHECK(any_diff);
}

TEST_CASE("idle preset keeps jacobians at identity") {
  auto spec = default_spec(BodyShape::quadruped, 48);
  auto script = make_script(Preset::idle, 6, limb_count(spec.body_shape), 3);
  auto clip = generate_sprite_video(spec, script, 3);
  for (const auto& kp : clip.keypoints)
    for (int k = 0; k < kp.k(); ++k) {
      CHECK(kp.jacobians.at(k, 0, 0) == doctest::Approx(1.0f));
      CHECK(kp.jacobians.at(k, 0, 1) == doctest::Approx(0.0f));
      CHECK(kp.jacobians.at(k, 1, 0) == doctest::Approx(0.0f));
      CHECK(kp.jacobians.at(k, 1, 1) == doctest::Approx(1.0f));
    }
}

TEST_CASE("dataset covers every body shape and preset") {
  DatasetConfig cfg;
  cfg.n_videos = 40;
  cfg.frames = 4;
  cfg.size = 32;
  auto clips = make_dataset(cfg, 11);
  REQUIRE(int(clips.size()) == 40);

  std::set<std::string> labels, presets;
  for (const auto& c : clips) {
    REQUIRE(int(c.frames.size()) == 4);
    REQUIRE(c.has_keypoints());
    labels.insert(c.label);
    presets.insert(c.preset_name);
  }
  CHECK(labels.size() == 4);
  CHECK(presets.size() == 5);

  auto again = make_dataset(cfg, 11);
  for (size_t i = 0; i < clips.size(); ++i) {
    CHECK(clips[i].label == again[i].label);
    CHECK(testutil::bitwise_equal(clips[i].frames[0], again[i].frames[0]));
  }
}

TEST_CASE("probe clip recovers the commanded rotation from rendered markers") {
  // One rotating bone with colored dots at the tip and at two rigid offsets.
  // The offsets o1, o2 span the plane, so the rendered marker centroids give
  // an estimate of the local linear map: columns J*o1 and J*o2.
  const std::vector<float> thetas = {0.0f, 0.4f, -0.7f, 1.1f};
  const int size = 128;
  auto clip = limb_probe_clip(thetas, size);
  REQUIRE(int(clip.frames.size()) == int(thetas.size()));
  REQUIRE(clip.has_keypoints());

  // rest offsets are given at the 64px canvas; rendering scales with size
  auto offs = probe_marker_offsets();
  const float u = float(size) / 64.0f;
  for (auto& o : offs) {
    o[0] *= u;
    o[1] *= u;
  }
  const auto cols = probe_marker_colors();
  // offsets must be linearly independent for the reconstruction to work
  const double det_o =
      double(offs[0][0]) * offs[1][1] - double(offs[0][1]) * offs[1][0];
  REQUIRE(std::abs(det_o) > 1e-6);

  for (size_t f = 0; f < thetas.size(); ++f) {
    const auto& frame = clip.frames[f];
    const auto tip = color_centroid(frame, cols[0]);
    const auto up = color_centroid(frame, cols[1]);
    const auto fwd = color_centroid(frame, cols[2]);

    // displacement of each marker from the tip, in pixels (x right, y down)
    const std::array<double, 2> d1 = {up[0] - tip[0], up[1] - tip[1]};
    const std::array<double, 2> d2 = {fwd[0] - tip[0], fwd[1] - tip[1]};

    // J_est = [d1 d2] * [o1 o2]^-1
    const double inv = 1.0 / det_o;
    std::array<double, 4> J_est;
    J_est[0] = (d1[0] * offs[1][1] - d2[0] * offs[0][1]) * inv;
    J_est[1] = (d2[0] * offs[0][0] - d1[0] * offs[1][0]) * inv;
    J_est[2] = (d1[1] * offs[1][1] - d2[1] * offs[0][1]) * inv;
    J_est[3] = (d2[1] * offs[0][0] - d1[1] * offs[1][0]) * inv;

    // oracle jacobian at the tip keypoint (index 1)
    const auto& jac = clip.keypoints[f].jacobians;
    const std::array<double, 4> J_oracle = {
        jac.at(1, 0, 0), jac.at(1, 0, 1), jac.at(1, 1, 0), jac.at(1, 1, 1)};

    CHECK(frob_rel(J_est, J_oracle) < 0.05);

    // and the oracle itself equals the rotation by theta
    const double c = std::cos(double(thetas[f])), s = std::sin(double(thetas[f]));
    const std::array<double, 4> R = {c, -s, s, c};
    CHECK(frob_rel(J_oracle, R) < 1e-4);
  }
}

TEST_CASE("normalized coordinate helpers invert each other") {
  for (int size : {32, 64}) {
    for (float p : {0.0f, 7.0f, 31.0f}) {
      const float n = to_norm(p, size);
      CHECK(to_pixel(n, size) == doctest::Approx(p).epsilon(1e-6));
      CHECK(n >= -1.0f);
      CHECK(n <= 1.0f);
    }
    CHECK(to_norm(-0.5f, size) == doctest::Approx(-1.0f));
    CHECK(to_norm(size - 0.5f, size) == doctest::Approx(1.0f));
  }
}

TEST_CASE("spec validation rejects malformed inputs") {
  SpriteSpec spec = default_spec(BodyShape::quadruped, 64);
  spec.size = 3;
  CHECK_THROWS(spec.validate());

  MotionScript bad;
  bad.frames = 0;
  CHECK_THROWS(bad.validate(4));

  auto script = make_script(Preset::walk, 5, 4, 1);
  CHECK_NOTHROW(script.validate(4));
  CHECK_THROWS(script.validate(3));  // wrong limb count
}
