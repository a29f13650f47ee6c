#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "lomo/synth/sprite.hpp"

// On-disk clip layout:
//   <dir>/meta.json          fps, label, preset, optional per-frame keypoints
//   <dir>/frames/%05d.png    RGB frames, indexed from 0
// A dataset is a directory of such clip dirs plus a dataset.json manifest
// listing them in order.
namespace lomo::synth {

void save_clip(const VideoClip& clip, const std::string& dir);
VideoClip load_clip(const std::string& dir);

void save_dataset(const std::vector<VideoClip>& clips, const std::string& dir);
std::vector<std::string> list_dataset(const std::string& dir);  // clip dirs, manifest order
std::vector<VideoClip> load_dataset(const std::string& dir);

nlohmann::json keypoints_to_json(const KeypointSet& ks);
KeypointSet keypoints_from_json(const nlohmann::json& j);

}  // namespace lomo::synth
