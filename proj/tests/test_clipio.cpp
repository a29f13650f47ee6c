#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "lomo/synth/clipio.hpp"
#include "lomo/synth/sprite.hpp"
#include "support.hpp"

using namespace lomo;
using namespace lomo::synth;
namespace fs = std::filesystem;

namespace {

VideoClip tiny_clip(uint64_t seed, int frames = 3, int size = 32) {
  auto spec = default_spec(BodyShape::biped, size);
  auto script = make_script(Preset::jump, frames, limb_count(spec.body_shape),
                            seed);
  return generate_sprite_video(spec, script, seed);
}

}  // namespace

TEST_CASE("clip save and load round-trips bit-exactly") {
  const auto dir = testutil::scratch_dir("clipio_roundtrip");
  auto clip = tiny_clip(21);
  save_clip(clip, dir + "/clip");

  CHECK(fs::exists(dir + "/clip/meta.json"));
  CHECK(fs::exists(dir + "/clip/frames/00000.png"));
  CHECK(fs::exists(dir + "/clip/frames/00002.png"));

  auto back = load_clip(dir + "/clip");
  CHECK(back.fps == clip.fps);
  CHECK(back.label == clip.label);
  CHECK(back.preset_name == clip.preset_name);
  REQUIRE(back.frames.size() == clip.frames.size());
  // frames were quantized at generation, so the png round-trip is lossless
  for (size_t i = 0; i < clip.frames.size(); ++i)
    CHECK(testutil::bitwise_equal(back.frames[i], clip.frames[i]));
  REQUIRE(back.keypoints.size() == clip.keypoints.size());
  for (size_t i = 0; i < clip.keypoints.size(); ++i) {
    CHECK(testutil::max_abs_diff(back.keypoints[i].positions,
                                 clip.keypoints[i].positions) < 1e-6);
    CHECK(testutil::max_abs_diff(back.keypoints[i].jacobians,
                                 clip.keypoints[i].jacobians) < 1e-6);
  }
}

TEST_CASE("clips without keypoints load as such") {
  const auto dir = testutil::scratch_dir("clipio_nokp");
  auto clip = tiny_clip(22);
  clip.keypoints.clear();
  save_clip(clip, dir + "/plain");
  auto back = load_clip(dir + "/plain");
  CHECK_FALSE(back.has_keypoints());
  CHECK(back.frames.size() == clip.frames.size());
}

TEST_CASE("dataset manifest preserves clip order") {
  const auto dir = testutil::scratch_dir("clipio_dataset");
  std::vector<VideoClip> clips = {tiny_clip(1), tiny_clip(2), tiny_clip(3)};
  clips[0].label = "quadruped";
  clips[1].label = "glyph";
  clips[2].label = "flag";
  save_dataset(clips, dir);

  auto dirs = list_dataset(dir);
  REQUIRE(dirs.size() == 3);

  auto back = load_dataset(dir);
  REQUIRE(back.size() == 3);
  CHECK(back[0].label == "quadruped");
  CHECK(back[1].label == "glyph");
  CHECK(back[2].label == "flag");
  for (size_t i = 0; i < clips.size(); ++i)
    CHECK(testutil::bitwise_equal(back[i].frames[0], clips[i].frames[0]));
}

TEST_CASE("keypoint json round-trip") {
  auto clip = tiny_clip(23, 2);
  const auto& ks = clip.keypoints[1];
  auto j = keypoints_to_json(ks);
  auto back = keypoints_from_json(j);
  REQUIRE(back.k() == ks.k());
  CHECK(testutil::max_abs_diff(back.positions, ks.positions) < 1e-6);
  CHECK(testutil::max_abs_diff(back.jacobians, ks.jacobians) < 1e-6);
}

TEST_CASE("loading a missing clip directory fails loudly") {
  const auto dir = testutil::scratch_dir("clipio_missing");
  CHECK_THROWS(load_clip(dir + "/nope"));
  CHECK_THROWS(load_dataset(dir + "/nothing"));
}

TEST_CASE("a run-style directory with manifest.json loads as a clip") {
  const auto dir = testutil::scratch_dir("clipio_manifest");
  auto clip = tiny_clip(24, 2);
  save_clip(clip, dir + "/run");
  // rename meta.json into a manifest with extra fields, as transfer runs do
  {
    std::ifstream in(dir + "/run/meta.json");
    nlohmann::json j;
    in >> j;
    j["command"] = "transfer";
    j["extra"] = {{"nested", true}};
    std::ofstream out(dir + "/run/manifest.json");
    out << j.dump(2);
  }
  fs::remove(dir + "/run/meta.json");

  auto back = load_clip(dir + "/run");
  CHECK(back.label == clip.label);
  REQUIRE(back.frames.size() == clip.frames.size());
  CHECK(testutil::bitwise_equal(back.frames[0], clip.frames[0]));
}
