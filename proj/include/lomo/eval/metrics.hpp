#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lomo/codec/codec.hpp"
#include "lomo/pipeline/transfer.hpp"
#include "lomo/synth/sprite.hpp"

namespace lomo::eval {

// Frame embedding: (3,S,S) -> L2-normalized vector. The default is the
// trained encoder's latent, flattened; anything injective and deterministic
// can stand in for it in tests.
using Embedder = std::function<Tensor<float>(const Tensor<float>&)>;

Embedder codec_embedder(const codec::Codec& codec);

double cosine(const Tensor<float>& a, const Tensor<float>& b);

// Mean cosine similarity between frame 0's embedding and each later frame's.
double frame_consistency(const synth::VideoClip& clip, const Embedder& embed);

// label -> mean normalized embedding over that class's frames.
std::map<std::string, Tensor<float>> class_prototypes(
    const std::vector<synth::VideoClip>& clips, const Embedder& embed);

// Mean over frames of cosine(embedding, prototype[label]).
double class_score(const synth::VideoClip& clip, const std::string& label,
                   const Embedder& embed,
                   const std::map<std::string, Tensor<float>>& prototypes);

struct Track {
  std::vector<double> x, y;
};

// Per-frame centroid of pixels whose color sits farther than `threshold`
// from the synthetic background, in normalized [-1,1] coordinates. A frame
// with no foreground contributes the image center.
Track centroid_track(const std::vector<Tensor<float>>& frames,
                     float threshold = 0.1f);

Track keypoint_centroid_track(const std::vector<synth::KeypointSet>& kps);

// Pearson correlation; sets *defined=false (and returns 0) when either side
// has zero variance instead of propagating NaN.
double pearson(const std::vector<double>& a, const std::vector<double>& b,
               bool* defined);

struct MotionFidelity {
  double x = 0, y = 0, combined = 0;
  bool x_defined = false, y_defined = false, combined_defined = false;
};

// Correlation between where the output sprite is and where the adapted
// keypoints say it should be. Combined pools both axes' moments into one
// coefficient.
MotionFidelity motion_fidelity(const Track& output, const Track& target);
MotionFidelity motion_fidelity(const pipeline::TransferResult& result);

// Mean per-channel L1 distance between 256-bin normalized histograms of
// each frame and the reference frame. Lower = closer color identity.
double identity_proxy(const std::vector<Tensor<float>>& frames,
                      const Tensor<float>& ref);

}  // namespace lomo::eval
