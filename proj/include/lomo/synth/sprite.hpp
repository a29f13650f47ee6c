#pragma once

#include <array>
#include <string>
#include <vector>

#include "lomo/core/tensor.hpp"

// Procedural articulated 2D sprites. A sprite is a small bone armature;
// joints carry oracle keypoints whose jacobians are the accumulated joint
// rotations relative to the rest pose. Rendering is an ordered SDF
// rasterization of capsules and discs with 1px antialiasing, quantized to
// the 8-bit grid so saved frames reload bit-exactly.
namespace lomo::synth {

// Fixed scene background; evaluation code keys foreground masks off it.
inline constexpr std::array<float, 3> kBackground{0.93f, 0.93f, 0.96f};
inline constexpr int kDatasetKeypoints = 10;

enum class BodyShape { quadruped, biped, glyph, flag };
enum class Preset { walk, run, jump, wave, idle };

const char* to_string(BodyShape s);
const char* to_string(Preset p);
BodyShape body_shape_from_string(const std::string& s);
Preset preset_from_string(const std::string& s);
int class_id(BodyShape s);
constexpr int num_classes() { return 4; }

int limb_count(BodyShape s);

struct SpriteSpec {
  BodyShape body_shape = BodyShape::quadruped;
  // Lengths (pixels) of the driven limb bones; empty = per-shape defaults.
  std::vector<float> limb_lengths;
  std::vector<std::array<float, 3>> palette;
  int size = 64;

  void validate() const;
};

SpriteSpec default_spec(BodyShape s, int size = 64);

struct MotionScript {
  int frames = 10;
  std::vector<std::array<float, 2>> root_translation;  // per frame, pixels
  std::vector<std::vector<float>> joint_angles;        // per frame, per limb
  Preset preset = Preset::idle;

  void validate(int n_limbs) const;
};

MotionScript make_script(Preset p, int frames, int n_limbs, uint64_t seed);

struct KeypointSet {
  Tensor<float> positions;  // (K,2), normalized [-1,1], y down
  Tensor<float> jacobians;  // (K,2,2)

  int k() const { return positions.ndim() ? positions.dim(0) : 0; }
  void validate() const;
};

struct VideoClip {
  std::vector<Tensor<float>> frames;  // (3,H,W) each
  float fps = 12.5f;
  std::vector<KeypointSet> keypoints;  // empty = absent
  std::string label;                   // body shape name
  std::string preset_name;

  bool has_keypoints() const { return !keypoints.empty(); }
};

VideoClip generate_sprite_video(const SpriteSpec& spec,
                                const MotionScript& script, uint64_t seed);

struct DatasetConfig {
  int n_videos = 200;
  int frames = 10;
  int size = 64;
};

std::vector<VideoClip> make_dataset(const DatasetConfig& cfg, uint64_t seed);

// Diagnostic one-limb sprite: a single rotating bone with three uniquely
// colored dots (limb tip plus two rigidly attached offsets), one frame per
// requested angle. Keypoints: 0 root, 1 tip, 2 up-marker, 3 forward-marker.
// The rest offsets of the markers from the tip are returned by
// probe_marker_offsets() so tests can recover the local deformation from
// rendered marker centroids alone.
VideoClip limb_probe_clip(const std::vector<float>& thetas, int size = 64);
std::array<std::array<float, 2>, 2> probe_marker_offsets();  // pixels
std::array<std::array<float, 3>, 3> probe_marker_colors();   // tip, up, fwd

// Pixel -> normalized coordinate helpers shared with the flow module's
// conventions: pixel center i maps to -1 + 2*(i+0.5)/n.
inline float to_norm(float pixel, int size) {
  return -1.0f + 2.0f * (pixel + 0.5f) / static_cast<float>(size);
}
inline float to_pixel(float norm, int size) {
  return (norm + 1.0f) * 0.5f * static_cast<float>(size) - 0.5f;
}

}  // namespace lomo::synth
