#include "lomo/synth/sprite.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lomo/core/image.hpp"
#include "lomo/core/rng.hpp"

namespace lomo::synth {
namespace {

constexpr double kPi = 3.14159265358979323846;

struct Bone {
  int parent;
  float ox, oy;  // rest offset from parent, pixels at size 64
  int limb;      // joint_angles column driving this bone, -1 = rigid
  float radius;
  int color;
  int order;  // painter's order, low drawn first
  int deco;   // 0 joint only, 1 capsule, 2 dot at tip, 3 capsule+dot, 4 capsule+disc
  float extra_r = 0;
  int col2 = -1;  // dot color for deco 3
};

struct Armature {
  std::vector<Bone> bones;
  int n_limbs = 0;
  float anchor_x = 0, anchor_y = 0;  // rest-pose centering offset, pixels
};

Armature build_armature(BodyShape s) {
  Armature a;
  auto B = [&a](int parent, float ox, float oy, int limb, float radius,
                int color, int order, int deco, float er = 0.0f) {
    a.bones.push_back({parent, ox, oy, limb, radius, color, order, deco, er, -1});
  };
  switch (s) {
    case BodyShape::quadruped:
      a.n_limbs = 6;
      a.anchor_x = -5.5f;
      a.anchor_y = -2.0f;
      B(-1, 0, 0, -1, 0, 0, 0, 0);          // 0 hip
      B(0, 12, 0, -1, 6.5f, 0, 2, 1);       // 1 chest / body
      B(1, 3, -7, 0, 2.6f, 0, 3, 4, 4.5f);  // 2 head on neck
      B(2, 5, 0.5f, -1, 1.8f, 2, 4, 1);     // 3 snout
      B(0, -9, -4, 1, 1.6f, 1, 1, 1);       // 4 tail
      B(1, 1, 13, 2, 2.2f, 1, 5, 1);        // 5 front foot, near
      B(1, -2, 13, 3, 2.2f, 1, 1, 1);       // 6 front foot, far
      B(0, 1, 13, 4, 2.2f, 1, 5, 1);        // 7 back foot, near
      B(0, -2, 13, 5, 2.2f, 1, 1, 1);       // 8 back foot, far
      B(0, 6, -6, -1, 1.5f, 2, 6, 2);       // 9 spine spot
      break;
    case BodyShape::biped:
      a.n_limbs = 5;
      a.anchor_x = 0;
      a.anchor_y = 4.0f;
      B(-1, 0, 0, -1, 0, 0, 0, 0);          // 0 pelvis
      B(0, 0, -10, -1, 4.5f, 0, 2, 1);      // 1 chest / torso
      B(1, 0, -6, 0, 2.0f, 0, 3, 4, 4.5f);  // 2 head on neck
      B(1, 6, 8, 1, 2.0f, 1, 5, 1);         // 3 hand, near
      B(1, -6, 8, 2, 2.0f, 1, 1, 1);        // 4 hand, far
      B(0, 3, 12, 3, 2.5f, 1, 5, 1);        // 5 foot, near
      B(0, -3, 12, 4, 2.5f, 1, 1, 1);       // 6 foot, far
      B(0, 2, -2, -1, 1.2f, 2, 6, 2);       // 7 hip marker
      B(1, 0, -2, -1, 1.2f, 2, 6, 2);       // 8 shoulder marker
      B(2, 0, -5, -1, 1.5f, 2, 6, 2);       // 9 crown
      break;
    case BodyShape::glyph:
      a.n_limbs = 3;
      a.anchor_x = -3.0f;
      a.anchor_y = 11.0f;
      B(-1, 0, 0, -1, 0, 0, 0, 0);        // 0 stem bottom
      B(0, 0, -11, 0, 3.0f, 0, 2, 1);     // 1 stem mid
      B(1, 0, -11, -1, 3.0f, 0, 2, 1);    // 2 stem top
      B(1, 5, -5, 1, 2.5f, 1, 3, 1);      // 3 upper branch mid
      B(3, 5, -5, -1, 2.5f, 1, 3, 1);     // 4 upper branch tip
      B(1, 5, 5, 2, 2.5f, 1, 3, 1);       // 5 lower branch mid
      B(5, 5, 5, -1, 2.5f, 1, 3, 1);      // 6 lower branch tip
      B(0, 3, 0, -1, 1.8f, 2, 4, 2);      // 7 serif, bottom
      B(2, 3, 0, -1, 1.8f, 2, 4, 2);      // 8 serif, top
      B(1, 2, 0, -1, 1.5f, 2, 4, 2);      // 9 waist dot
      break;
    case BodyShape::flag:
      a.n_limbs = 4;
      a.anchor_x = -13.0f;
      a.anchor_y = 14.0f;
      B(-1, 0, 0, -1, 0, 0, 0, 0);          // 0 pole base
      B(0, 0, -26, -1, 1.5f, 0, 2, 1);      // 1 pole top
      B(1, 7, 1, 0, 2.8f, 1, 3, 1);         // 2 cloth joint 1
      B(2, 7, 0, 1, 2.8f, 1, 3, 1);         // 3 cloth joint 2
      B(3, 7, 0, 2, 2.8f, 1, 3, 1);         // 4 cloth joint 3
      B(4, 6, 0, 3, 2.8f, 1, 3, 1);         // 5 cloth tip
      B(0, 0, -13, -1, 1.3f, 2, 4, 2);      // 6 pole mid marker
      B(0, 2, 0, -1, 1.3f, 2, 4, 2);        // 7 base marker
      B(2, 0, -2.5f, -1, 1.3f, 2, 4, 2);    // 8 cloth marker
      B(1, 0, -3, -1, 2.0f, 2, 4, 2);       // 9 finial
      break;
  }
  return a;
}

struct Prim {
  int kind;  // 0 capsule, 1 disc
  float ax, ay, bx, by, r;
  std::array<float, 3> col;
  int order;
};

float sd_capsule(float px, float py, float ax, float ay, float bx, float by,
                 float r) {
  const float pax = px - ax, pay = py - ay;
  const float bax = bx - ax, bay = by - ay;
  const float denom = bax * bax + bay * bay;
  float h = denom > 1e-12f ? (pax * bax + pay * bay) / denom : 0.0f;
  h = std::clamp(h, 0.0f, 1.0f);
  const float dx = pax - bax * h, dy = pay - bay * h;
  return std::sqrt(dx * dx + dy * dy) - r;
}

Tensor<float> render(const std::vector<Prim>& prims_in, int size) {
  std::vector<Prim> prims = prims_in;
  std::stable_sort(prims.begin(), prims.end(),
                   [](const Prim& a, const Prim& b) { return a.order < b.order; });
  Tensor<float> img({3, size, size});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float r = kBackground[0], g = kBackground[1], b = kBackground[2];
      const float px = static_cast<float>(x), py = static_cast<float>(y);
      for (const Prim& p : prims) {
        float d;
        if (p.kind == 0) {
          d = sd_capsule(px, py, p.ax, p.ay, p.bx, p.by, p.r);
        } else {
          const float dx = px - p.ax, dy = py - p.ay;
          d = std::sqrt(dx * dx + dy * dy) - p.r;
        }
        const float a = std::clamp(0.5f - d, 0.0f, 1.0f);
        if (a > 0) {
          r += a * (p.col[0] - r);
          g += a * (p.col[1] - g);
          b += a * (p.col[2] - b);
        }
      }
      img.at(0, y, x) = r;
      img.at(1, y, x) = g;
      img.at(2, y, x) = b;
    }
  return img;
}

struct Pose {
  std::vector<float> px, py, ang;  // per bone: position (pixels), accumulated angle
};

Pose forward_kinematics(const Armature& arm, const std::vector<float>& offs_x,
                        const std::vector<float>& offs_y, float root_x,
                        float root_y, const std::vector<float>& angles) {
  const size_t n = arm.bones.size();
  Pose pose;
  pose.px.resize(n);
  pose.py.resize(n);
  pose.ang.resize(n);
  for (size_t j = 0; j < n; ++j) {
    const Bone& bn = arm.bones[j];
    const float dev = bn.limb >= 0 ? angles[static_cast<size_t>(bn.limb)] : 0.0f;
    if (bn.parent < 0) {
      pose.ang[j] = dev;
      pose.px[j] = root_x;
      pose.py[j] = root_y;
    } else {
      const float acc = pose.ang[static_cast<size_t>(bn.parent)] + dev;
      pose.ang[j] = acc;
      const float c = std::cos(acc), s = std::sin(acc);
      pose.px[j] = pose.px[static_cast<size_t>(bn.parent)] + c * offs_x[j] - s * offs_y[j];
      pose.py[j] = pose.py[static_cast<size_t>(bn.parent)] + s * offs_x[j] + c * offs_y[j];
    }
  }
  return pose;
}

std::vector<Prim> pose_prims(const Armature& arm, const Pose& pose, float u,
                             const std::vector<std::array<float, 3>>& palette) {
  auto color = [&palette](int idx) {
    return palette[static_cast<size_t>(idx) % palette.size()];
  };
  std::vector<Prim> prims;
  for (size_t j = 0; j < arm.bones.size(); ++j) {
    const Bone& bn = arm.bones[j];
    if (bn.deco == 0 || bn.parent < 0) continue;
    const float ax = pose.px[static_cast<size_t>(bn.parent)];
    const float ay = pose.py[static_cast<size_t>(bn.parent)];
    const float bx = pose.px[j], by = pose.py[j];
    if (bn.deco == 1 || bn.deco == 3 || bn.deco == 4)
      prims.push_back({0, ax, ay, bx, by, bn.radius * u, color(bn.color), bn.order});
    if (bn.deco == 2)
      prims.push_back({1, bx, by, 0, 0, bn.radius * u, color(bn.color), bn.order});
    if (bn.deco == 3)
      prims.push_back({1, bx, by, 0, 0, bn.extra_r * u, color(bn.col2), bn.order + 1});
    if (bn.deco == 4)
      prims.push_back({1, bx, by, 0, 0, bn.extra_r * u, color(bn.color), bn.order});
  }
  return prims;
}

KeypointSet pose_keypoints(const Pose& pose, int size) {
  const int K = static_cast<int>(pose.px.size());
  KeypointSet ks;
  ks.positions = Tensor<float>({K, 2});
  ks.jacobians = Tensor<float>({K, 2, 2});
  for (int j = 0; j < K; ++j) {
    ks.positions.at(j, 0) = to_norm(pose.px[static_cast<size_t>(j)], size);
    ks.positions.at(j, 1) = to_norm(pose.py[static_cast<size_t>(j)], size);
    const float c = std::cos(pose.ang[static_cast<size_t>(j)]);
    const float s = std::sin(pose.ang[static_cast<size_t>(j)]);
    ks.jacobians.at(j, 0, 0) = c;
    ks.jacobians.at(j, 0, 1) = -s;
    ks.jacobians.at(j, 1, 0) = s;
    ks.jacobians.at(j, 1, 1) = c;
  }
  return ks;
}

// Per-bone rest offsets, scaled to the requested canvas and with driven
// bones rescaled to the spec's limb lengths.
void bone_offsets(const Armature& arm, const SpriteSpec& spec, float u,
                  std::vector<float>& ox, std::vector<float>& oy) {
  ox.resize(arm.bones.size());
  oy.resize(arm.bones.size());
  for (size_t j = 0; j < arm.bones.size(); ++j) {
    const Bone& bn = arm.bones[j];
    float x = bn.ox, y = bn.oy;
    if (bn.limb >= 0 && !spec.limb_lengths.empty()) {
      const float len0 = std::sqrt(x * x + y * y);
      const float len = spec.limb_lengths[static_cast<size_t>(bn.limb)];
      if (len0 > 1e-6f) {
        x *= len / len0;
        y *= len / len0;
      }
    }
    ox[j] = x * u;
    oy[j] = y * u;
  }
}

std::array<float, 3> hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - f * s);
  const double t = v * (1.0 - (1.0 - f) * s);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(i) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    case 5: r = v; g = p; b = q; break;
  }
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

std::array<float, 3> random_sprite_color(Rng& rng) {
  for (int tries = 0; tries < 12; ++tries) {
    auto c = hsv_to_rgb(rng.uniform(), rng.uniform(0.55, 0.95),
                        rng.uniform(0.4, 0.9));
    const float d0 = c[0] - kBackground[0], d1 = c[1] - kBackground[1],
                d2 = c[2] - kBackground[2];
    if (std::sqrt(d0 * d0 + d1 * d1 + d2 * d2) > 0.35f) return c;
  }
  return {0.25f, 0.2f, 0.3f};
}

}  // namespace

const char* to_string(BodyShape s) {
  switch (s) {
    case BodyShape::quadruped: return "quadruped";
    case BodyShape::biped: return "biped";
    case BodyShape::glyph: return "glyph";
    case BodyShape::flag: return "flag";
  }
  return "?";
}

const char* to_string(Preset p) {
  switch (p) {
    case Preset::walk: return "walk";
    case Preset::run: return "run";
    case Preset::jump: return "jump";
    case Preset::wave: return "wave";
    case Preset::idle: return "idle";
  }
  return "?";
}

BodyShape body_shape_from_string(const std::string& s) {
  if (s == "quadruped") return BodyShape::quadruped;
  if (s == "biped") return BodyShape::biped;
  if (s == "glyph") return BodyShape::glyph;
  if (s == "flag") return BodyShape::flag;
  throw std::invalid_argument("unknown body shape: " + s);
}

Preset preset_from_string(const std::string& s) {
  if (s == "walk") return Preset::walk;
  if (s == "run") return Preset::run;
  if (s == "jump") return Preset::jump;
  if (s == "wave") return Preset::wave;
  if (s == "idle") return Preset::idle;
  throw std::invalid_argument("unknown preset: " + s);
}

int class_id(BodyShape s) { return static_cast<int>(s); }

int limb_count(BodyShape s) { return build_armature(s).n_limbs; }

void SpriteSpec::validate() const {
  if (size <= 0 || size % 8 != 0)
    throw std::invalid_argument("SpriteSpec.size must be a positive multiple of 8");
  if (palette.empty())
    throw std::invalid_argument("SpriteSpec.palette must be non-empty");
  const int nl = limb_count(body_shape);
  if (!limb_lengths.empty() &&
      static_cast<int>(limb_lengths.size()) != nl)
    throw std::invalid_argument("SpriteSpec.limb_lengths must have " +
                                std::to_string(nl) + " entries for " +
                                to_string(body_shape));
  for (float l : limb_lengths)
    if (!(l > 0))
      throw std::invalid_argument("SpriteSpec.limb_lengths must all be > 0");
}

SpriteSpec default_spec(BodyShape s, int size) {
  SpriteSpec spec;
  spec.body_shape = s;
  spec.size = size;
  switch (s) {
    case BodyShape::quadruped:
      spec.palette = {{0.72f, 0.45f, 0.20f}, {0.45f, 0.26f, 0.12f}, {0.22f, 0.13f, 0.08f}};
      break;
    case BodyShape::biped:
      spec.palette = {{0.25f, 0.45f, 0.75f}, {0.15f, 0.25f, 0.50f}, {0.90f, 0.75f, 0.20f}};
      break;
    case BodyShape::glyph:
      spec.palette = {{0.15f, 0.15f, 0.22f}, {0.62f, 0.15f, 0.20f}, {0.90f, 0.60f, 0.10f}};
      break;
    case BodyShape::flag:
      spec.palette = {{0.35f, 0.25f, 0.15f}, {0.80f, 0.18f, 0.18f}, {0.95f, 0.80f, 0.30f}};
      break;
  }
  return spec;
}

void MotionScript::validate(int n_limbs) const {
  if (frames < 1)
    throw std::invalid_argument("MotionScript.frames must be >= 1");
  if (static_cast<int>(root_translation.size()) != frames)
    throw std::invalid_argument("MotionScript.root_translation must have one entry per frame");
  if (static_cast<int>(joint_angles.size()) != frames)
    throw std::invalid_argument("MotionScript.joint_angles must have one row per frame");
  for (const auto& row : joint_angles) {
    if (static_cast<int>(row.size()) != n_limbs)
      throw std::invalid_argument("MotionScript.joint_angles rows must have one angle per limb");
    for (float a : row)
      if (!std::isfinite(a))
        throw std::invalid_argument("MotionScript.joint_angles must be finite");
  }
  for (const auto& t : root_translation)
    if (!std::isfinite(t[0]) || !std::isfinite(t[1]))
      throw std::invalid_argument("MotionScript.root_translation must be finite");
}

void KeypointSet::validate() const {
  if (positions.ndim() != 2 || positions.dim(1) != 2 || k() < 1)
    throw std::invalid_argument("KeypointSet.positions must be (K,2), K >= 1");
  if (jacobians.ndim() != 3 || jacobians.dim(0) != k() || jacobians.dim(1) != 2 ||
      jacobians.dim(2) != 2)
    throw std::invalid_argument("KeypointSet.jacobians must be (K,2,2)");
  for (int j = 0; j < k(); ++j) {
    for (int d = 0; d < 2; ++d) {
      const float v = positions.at(j, d);
      if (!(v >= -1.0f && v <= 1.0f))
        throw std::invalid_argument("KeypointSet position " + std::to_string(j) +
                                    " outside [-1,1]");
    }
    const float det = jacobians.at(j, 0, 0) * jacobians.at(j, 1, 1) -
                      jacobians.at(j, 0, 1) * jacobians.at(j, 1, 0);
    if (!(std::abs(det) > 1e-6f))
      throw std::invalid_argument("KeypointSet jacobian " + std::to_string(j) +
                                  " is singular");
  }
}

MotionScript make_script(Preset p, int frames, int n_limbs, uint64_t seed) {
  // Amplitudes are tuned for a 64px canvas; translations are in pixels.
  MotionScript s;
  s.preset = p;
  s.frames = frames;
  s.root_translation.assign(static_cast<size_t>(frames), {0.0f, 0.0f});
  s.joint_angles.assign(static_cast<size_t>(frames),
                        std::vector<float>(static_cast<size_t>(n_limbs), 0.0f));
  if (p == Preset::idle) return s;

  Rng rng(seed);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double amp = rng.uniform(0.85, 1.15);
  const double mid = (frames - 1) / 2.0;
  for (int i = 0; i < frames; ++i) {
    auto& tr = s.root_translation[static_cast<size_t>(i)];
    auto& ang = s.joint_angles[static_cast<size_t>(i)];
    const double tn = frames > 1 ? static_cast<double>(i) / (frames - 1) : 0.0;
    switch (p) {
      case Preset::walk: {
        const double w = 2.0 * kPi / 8.0;
        tr[0] = static_cast<float>(1.1 * amp * (i - mid));
        tr[1] = static_cast<float>(0.8 * amp * std::sin(2.0 * w * i + phase));
        for (int l = 0; l < n_limbs; ++l)
          ang[static_cast<size_t>(l)] =
              static_cast<float>(0.45 * amp * std::sin(w * i + phase + kPi * l));
        break;
      }
      case Preset::run: {
        const double w = 2.0 * kPi / 5.0;
        tr[0] = static_cast<float>(2.0 * amp * (i - mid));
        tr[1] = static_cast<float>(1.4 * amp * std::sin(2.0 * w * i + phase));
        for (int l = 0; l < n_limbs; ++l)
          ang[static_cast<size_t>(l)] =
              static_cast<float>(0.8 * amp * std::sin(w * i + phase + kPi * l));
        break;
      }
      case Preset::jump: {
        const double arc = 4.0 * tn * (1.0 - tn);
        tr[0] = static_cast<float>(0.6 * amp * (i - mid));
        tr[1] = static_cast<float>(-9.0 * amp * arc);
        for (int l = 0; l < n_limbs; ++l)
          ang[static_cast<size_t>(l)] =
              static_cast<float>(-0.9 * amp * arc * (l % 2 == 0 ? 1.0 : -1.0));
        break;
      }
      case Preset::wave: {
        const double w = 2.0 * kPi / 6.0;
        const int main_limb = n_limbs > 1 ? 1 : 0;
        for (int l = 0; l < n_limbs; ++l) {
          const double a = l == main_limb
                               ? 1.1 * amp * std::sin(w * i + phase)
                               : 0.06 * amp * std::sin(0.75 * w * i + phase + kPi * l);
          ang[static_cast<size_t>(l)] = static_cast<float>(a);
        }
        break;
      }
      case Preset::idle:
        break;
    }
  }
  return s;
}

VideoClip generate_sprite_video(const SpriteSpec& spec,
                                const MotionScript& script, uint64_t seed) {
  (void)seed;  // generation is already a pure function of (spec, script)
  spec.validate();
  const Armature arm = build_armature(spec.body_shape);
  script.validate(arm.n_limbs);

  const float u = static_cast<float>(spec.size) / 64.0f;
  std::vector<float> ox, oy;
  bone_offsets(arm, spec, u, ox, oy);

  const float cx = (spec.size - 1) / 2.0f + arm.anchor_x * u;
  const float cy = (spec.size - 1) / 2.0f + arm.anchor_y * u;

  VideoClip clip;
  clip.fps = 12.5f;
  clip.label = to_string(spec.body_shape);
  clip.preset_name = to_string(script.preset);
  for (int i = 0; i < script.frames; ++i) {
    const auto& tr = script.root_translation[static_cast<size_t>(i)];
    const Pose pose = forward_kinematics(arm, ox, oy, cx + tr[0] * 1.0f,
                                         cy + tr[1] * 1.0f,
                                         script.joint_angles[static_cast<size_t>(i)]);
    clip.frames.push_back(
        img::quantize8(render(pose_prims(arm, pose, u, spec.palette), spec.size)));
    KeypointSet ks = pose_keypoints(pose, spec.size);
    ks.validate();
    clip.keypoints.push_back(std::move(ks));
  }
  return clip;
}

std::vector<VideoClip> make_dataset(const DatasetConfig& cfg, uint64_t seed) {
  if (cfg.n_videos < 1)
    throw std::invalid_argument("DatasetConfig.n_videos must be >= 1");
  Rng root(seed);
  std::vector<VideoClip> out;
  out.reserve(static_cast<size_t>(cfg.n_videos));
  for (int i = 0; i < cfg.n_videos; ++i) {
    Rng r = root.fork(static_cast<uint64_t>(i));
    const auto shape = static_cast<BodyShape>(i % num_classes());
    const auto preset = static_cast<Preset>(r.uniform_int(0, 5));
    SpriteSpec spec = default_spec(shape, cfg.size);
    spec.palette = {random_sprite_color(r), random_sprite_color(r),
                    random_sprite_color(r)};
    const Armature arm = build_armature(shape);
    spec.limb_lengths.clear();
    for (const Bone& bn : arm.bones)
      if (bn.limb >= 0) {
        const float len0 = std::sqrt(bn.ox * bn.ox + bn.oy * bn.oy);
        // Bones appear in limb order in every armature table.
        spec.limb_lengths.push_back(
            len0 * static_cast<float>(r.uniform(0.85, 1.2)));
      }
    const MotionScript script =
        make_script(preset, cfg.frames, arm.n_limbs, r.next_u64());
    out.push_back(generate_sprite_video(spec, script, r.next_u64()));
  }
  return out;
}

std::array<std::array<float, 2>, 2> probe_marker_offsets() {
  return {{{0.0f, -5.0f}, {5.0f, 0.0f}}};
}

std::array<std::array<float, 3>, 3> probe_marker_colors() {
  return {{{0.95f, 0.05f, 0.05f}, {0.05f, 0.75f, 0.10f}, {0.10f, 0.20f, 0.95f}}};
}

VideoClip limb_probe_clip(const std::vector<float>& thetas, int size) {
  Armature arm;
  arm.n_limbs = 1;
  const auto mk = probe_marker_offsets();
  const auto mc = probe_marker_colors();
  arm.bones.push_back({-1, 0, 0, -1, 0, 0, 0, 0, 0, -1});
  arm.bones.push_back({0, 14, 0, 0, 3.0f, 0, 1, 3, 1.7f, 1});  // limb + tip dot
  arm.bones.push_back({1, mk[0][0], mk[0][1], -1, 1.6f, 2, 2, 2, 0, -1});
  arm.bones.push_back({1, mk[1][0], mk[1][1], -1, 1.6f, 2 + 1, 2, 2, 0, -1});
  const std::vector<std::array<float, 3>> palette = {
      {0.45f, 0.45f, 0.5f}, mc[0], mc[1], mc[2]};

  const float u = static_cast<float>(size) / 64.0f;
  std::vector<float> ox(arm.bones.size()), oy(arm.bones.size());
  for (size_t j = 0; j < arm.bones.size(); ++j) {
    ox[j] = arm.bones[j].ox * u;
    oy[j] = arm.bones[j].oy * u;
  }
  const float cx = (size - 1) / 2.0f - 7.0f * u;
  const float cy = (size - 1) / 2.0f;

  VideoClip clip;
  clip.fps = 12.5f;
  clip.label = "probe";
  clip.preset_name = "probe";
  for (float th : thetas) {
    const Pose pose = forward_kinematics(arm, ox, oy, cx, cy, {th});
    clip.frames.push_back(img::quantize8(render(pose_prims(arm, pose, u, palette), size)));
    clip.keypoints.push_back(pose_keypoints(pose, size));
  }
  return clip;
}

}  // namespace lomo::synth
