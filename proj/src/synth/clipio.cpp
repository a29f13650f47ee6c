#include "lomo/synth/clipio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "lomo/core/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lomo::synth {
namespace {

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d.png", i);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

json keypoints_to_json(const KeypointSet& ks) {
  json pos = json::array(), jac = json::array();
  for (int j = 0; j < ks.k(); ++j) {
    pos.push_back({ks.positions.at(j, 0), ks.positions.at(j, 1)});
    jac.push_back({{ks.jacobians.at(j, 0, 0), ks.jacobians.at(j, 0, 1)},
                   {ks.jacobians.at(j, 1, 0), ks.jacobians.at(j, 1, 1)}});
  }
  return json{{"positions", pos}, {"jacobians", jac}};
}

KeypointSet keypoints_from_json(const json& j) {
  const auto& pos = j.at("positions");
  const auto& jac = j.at("jacobians");
  const int K = static_cast<int>(pos.size());
  if (static_cast<int>(jac.size()) != K)
    throw std::runtime_error("keypoint positions/jacobians length mismatch");
  KeypointSet ks;
  ks.positions = Tensor<float>({K, 2});
  ks.jacobians = Tensor<float>({K, 2, 2});
  for (int k = 0; k < K; ++k) {
    ks.positions.at(k, 0) = pos.at(k).at(0).get<float>();
    ks.positions.at(k, 1) = pos.at(k).at(1).get<float>();
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        ks.jacobians.at(k, r, c) = jac.at(k).at(r).at(c).get<float>();
  }
  return ks;
}

void save_clip(const VideoClip& clip, const std::string& dir) {
  if (clip.frames.empty())
    throw std::invalid_argument("save_clip: clip has no frames");
  if (clip.has_keypoints() && clip.keypoints.size() != clip.frames.size())
    throw std::invalid_argument(
        "save_clip: keypoints must be absent or one set per frame");
  const fs::path root(dir);
  fs::create_directories(root / "frames");
  for (size_t i = 0; i < clip.frames.size(); ++i)
    img::save_png((root / "frames" / frame_name(static_cast<int>(i))).string(),
                  clip.frames[i]);

  json meta;
  meta["fps"] = clip.fps;
  meta["label"] = clip.label;
  meta["preset"] = clip.preset_name;
  meta["n_frames"] = clip.frames.size();
  if (clip.has_keypoints()) {
    json kps = json::array();
    for (const auto& ks : clip.keypoints) kps.push_back(keypoints_to_json(ks));
    meta["keypoints"] = std::move(kps);
  }
  write_text(root / "meta.json", meta.dump(2) + "\n");
}

VideoClip load_clip(const std::string& dir) {
  const fs::path root(dir);
  // Transfer run directories store the clip fields in their manifest
  // instead of a separate meta.json; accept either.
  fs::path meta_path = root / "meta.json";
  if (!fs::exists(meta_path) && fs::exists(root / "manifest.json"))
    meta_path = root / "manifest.json";
  std::ifstream mf(meta_path, std::ios::binary);
  if (!mf)
    throw std::runtime_error("clip metadata not found: " + meta_path.string());

  VideoClip clip;
  try {
    const json meta = json::parse(mf);
    clip.fps = meta.value("fps", 12.5f);
    clip.label = meta.value("label", std::string());
    clip.preset_name = meta.value("preset", std::string());
    if (meta.contains("keypoints"))
      for (const auto& jk : meta.at("keypoints"))
        clip.keypoints.push_back(keypoints_from_json(jk));
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed clip metadata " + meta_path.string() +
                             ": " + e.what());
  }

  for (int i = 0;; ++i) {
    const fs::path fp = root / "frames" / frame_name(i);
    if (!fs::exists(fp)) break;
    Tensor<float> frame = img::load_png(fp.string());
    if (!clip.frames.empty() && !frame.same_shape(clip.frames.front()))
      throw std::runtime_error("frame size mismatch in clip: " + fp.string() +
                               " is " + frame.shape_str() + ", expected " +
                               clip.frames.front().shape_str());
    clip.frames.push_back(std::move(frame));
  }
  if (clip.frames.empty())
    throw std::runtime_error("clip has no frames: " + (root / "frames").string());
  if (clip.has_keypoints() && clip.keypoints.size() != clip.frames.size())
    throw std::runtime_error("clip " + root.string() + " has " +
                             std::to_string(clip.keypoints.size()) +
                             " keypoint sets for " +
                             std::to_string(clip.frames.size()) + " frames");
  return clip;
}

void save_dataset(const std::vector<VideoClip>& clips, const std::string& dir) {
  if (clips.empty()) throw std::invalid_argument("save_dataset: no clips");
  const fs::path root(dir);
  fs::create_directories(root);
  json names = json::array();
  for (size_t i = 0; i < clips.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%05d", static_cast<int>(i));
    save_clip(clips[i], (root / buf).string());
    names.push_back(buf);
  }
  json manifest;
  manifest["clips"] = std::move(names);
  manifest["size"] = clips.front().frames.front().dim(1);
  manifest["frames"] = clips.front().frames.size();
  write_text(root / "dataset.json", manifest.dump(2) + "\n");
}

std::vector<std::string> list_dataset(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "dataset.json";
  std::ifstream f(manifest_path, std::ios::binary);
  if (!f)
    throw std::runtime_error("dataset manifest not found: " +
                             manifest_path.string());
  try {
    const json manifest = json::parse(f);
    std::vector<std::string> out;
    for (const auto& name : manifest.at("clips"))
      out.push_back((fs::path(dir) / name.get<std::string>()).string());
    return out;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed dataset manifest " +
                             manifest_path.string() + ": " + e.what());
  }
}

std::vector<VideoClip> load_dataset(const std::string& dir) {
  std::vector<VideoClip> out;
  for (const auto& cd : list_dataset(dir)) out.push_back(load_clip(cd));
  return out;
}

}  // namespace lomo::synth
