#pragma once

#include <array>
#include <vector>

#include "json.hpp"
#include "lomo/core/tensor.hpp"
#include "lomo/synth/sprite.hpp"

// Sparse keypoint motion -> local affine maps -> dense flow machinery over
// the latent grid. Coordinates are normalized [-1,1] with y down; grid cell
// (i,j) sits at (-1 + 2(j+0.5)/w, -1 + 2(i+0.5)/h).
namespace lomo::flow {

// Planar displacement field; channel 0 moves x, channel 1 moves y, both in
// normalized units. A zero field is the identity motion.
struct DenseFlow {
  Tensor<float> d;  // (2,h,w)

  DenseFlow() = default;
  DenseFlow(int h, int w) : d(Tensor<float>({2, h, w})) {}
  int h() const { return d.dim(1); }
  int w() const { return d.dim(2); }
  float& dx(int i, int j) { return d.at(0, i, j); }
  float& dy(int i, int j) { return d.at(1, i, j); }
  float dx(int i, int j) const { return d.at(0, i, j); }
  float dy(int i, int j) const { return d.at(1, i, j); }
};

nlohmann::json flow_to_json(const DenseFlow& f);
DenseFlow flow_from_json(const nlohmann::json& j);

// exp(-|cell - kp|^2 / (2 sigma^2)) per keypoint: (K,2) -> (K,h,w).
Tensor<float> gaussian_heatmaps(const Tensor<float>& kp, int h, int w,
                                float sigma);

// T(z) = target + linear (z - source).
struct LocalAffine {
  std::array<float, 2> source{};  // driving keypoint
  std::array<float, 2> target{};  // reference keypoint
  std::array<float, 4> linear{};  // row-major 2x2

  std::array<float, 2> apply(float x, float y) const {
    const float rx = x - source[0], ry = y - source[1];
    return {target[0] + linear[0] * rx + linear[1] * ry,
            target[1] + linear[2] * rx + linear[3] * ry};
  }
};

std::vector<LocalAffine> local_affines(const synth::KeypointSet& kp_ref,
                                       const synth::KeypointSet& kp_drv);

// Displacement fields of the K affine candidates plus the identity, in
// candidate order (affines 0..K-1, identity last): (K+1,2,h,w).
Tensor<float> candidate_displacements(const std::vector<LocalAffine>& affines,
                                      int h, int w);

// Backward warp with bilinear sampling and border clamping:
// out(c,i,j) = sample(latent_c, cell(i,j) + flow(i,j)).
Tensor<float> warp(const Tensor<float>& latent, const DenseFlow& flow);

// d(loss)/d(flow) for the warp above, given d(loss)/d(out). (2,h,w).
Tensor<float> warp_backward_flow(const Tensor<float>& latent,
                                 const DenseFlow& flow,
                                 const Tensor<float>& gout);

// Counter-clockwise hull vertices starting at the lexicographically smallest
// point; collinear boundary points are dropped. Throws on degenerate input.
std::vector<std::array<float, 2>> convex_hull(
    const std::vector<std::array<float, 2>>& pts);

// Retarget a driving keypoint sequence onto a source shape: relative driving
// displacements, rescaled by the per-axis hull bounding-box ratio, applied
// from the source frame-0 keypoints; jacobians compose the relative driving
// rotation onto the source jacobians.
std::vector<synth::KeypointSet> adapt_keypoints(
    const synth::KeypointSet& kp_src_frame0,
    const std::vector<synth::KeypointSet>& kp_drv_seq);

inline float grid_x(int j, int w) {
  return -1.0f + 2.0f * (static_cast<float>(j) + 0.5f) / static_cast<float>(w);
}
inline float grid_y(int i, int h) {
  return -1.0f + 2.0f * (static_cast<float>(i) + 0.5f) / static_cast<float>(h);
}

}  // namespace lomo::flow
