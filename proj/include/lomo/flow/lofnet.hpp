#pragma once

#include <string>
#include <vector>

#include "lomo/codec/codec.hpp"
#include "lomo/flow/geometry.hpp"
#include "lomo/nn/layers.hpp"

// Dense-flow predictor. Input per cell: K heatmap differences (driving minus
// reference) concatenated with the reference latent warped by each of the K
// local affine candidates and by the identity. The network emits K+1 mask
// logits; the flow is the per-cell softmax-weighted sum of the candidate
// displacements.
namespace lomo::flow {

struct LOFNetConfig {
  int iters = 2000;
  float lr = 5e-4f;
  float holdout_frac = 0.1f;
  uint64_t seed = 2;
};

class LOFNet {
 public:
  LOFNet(int grid, int k, float sigma = 0.1f, int hidden = 64);
  explicit LOFNet(const std::string& checkpoint_path);
  LOFNet(const LOFNet&) = delete;
  LOFNet& operator=(const LOFNet&) = delete;

  int grid() const { return grid_; }
  int keypoint_count() const { return k_; }
  float sigma() const { return sigma_; }

  void init(Rng& rng);
  nn::ParamSet<float>& params() { return params_; }

  struct Result {
    DenseFlow flow;
    Tensor<float> mask;  // (K+1,h,w), each cell sums to 1
  };

  // Cached training path; backward takes d(loss)/d(flow.d) as (2,h,w).
  Result forward(const Tensor<float>& z_ref, const synth::KeypointSet& kp_ref,
                 const synth::KeypointSet& kp_drv);
  void backward(const Tensor<float>& gflow);

  // Cache-free inference, safe for concurrent callers.
  Result predict(const Tensor<float>& z_ref, const synth::KeypointSet& kp_ref,
                 const synth::KeypointSet& kp_drv) const;

  void save(const std::string& path,
            const std::vector<float>& loss_history = {}) const;

 private:
  Tensor<float> build_input(const Tensor<float>& z_ref,
                            const synth::KeypointSet& kp_ref,
                            const synth::KeypointSet& kp_drv,
                            Tensor<float>& disp) const;
  Result compose(const Tensor<float>& logits, const Tensor<float>& disp) const;

  int grid_, k_;
  float sigma_;
  int hidden_;
  nn::Conv2d<float> c1_, c2_, c3_, c4_;
  nn::GroupNorm<float> n1_, n2_, n3_;
  nn::SiLU<float> a1_, a2_, a3_;
  nn::ParamSet<float> params_;
  Tensor<float> disp_, mask_;  // training caches
};

struct LOFNetTrainStats {
  std::vector<float> loss;  // one entry per iteration
  float holdout_initial = 0;
  float holdout_final = 0;
};

// Samples a clip and a random distinct frame pair per iteration and
// minimizes MSE between the warped reference latent and the driving latent.
// Clips with fewer than 2 keypointed frames are skipped with a warning.
LOFNetTrainStats train_lofnet(LOFNet& net,
                              const std::vector<codec::LatentClip>& clips,
                              const LOFNetConfig& cfg);

}  // namespace lomo::flow
