#include "lomo/eval/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace lomo::eval {

namespace {

void normalize(Tensor<float>& v) {
  double ss = 0;
  for (int64_t i = 0; i < v.numel(); ++i) ss += double(v.data()[i]) * v.data()[i];
  const double inv = ss > 0 ? 1.0 / std::sqrt(ss) : 0.0;
  for (int64_t i = 0; i < v.numel(); ++i)
    v.data()[i] = float(v.data()[i] * inv);
}

}  // namespace

Embedder codec_embedder(const codec::Codec& codec) {
  return [&codec](const Tensor<float>& frame) {
    Tensor<float> z = codec.encode(frame);
    Tensor<float> v = z.reshaped({int(z.numel())});
    normalize(v);
    return v;
  };
}

double cosine(const Tensor<float>& a, const Tensor<float>& b) {
  if (a.numel() != b.numel())
    throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    dot += double(a.data()[i]) * b.data()[i];
    na += double(a.data()[i]) * a.data()[i];
    nb += double(b.data()[i]) * b.data()[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

double frame_consistency(const synth::VideoClip& clip, const Embedder& embed) {
  if (clip.frames.size() < 2)
    throw std::invalid_argument("frame_consistency: need at least 2 frames");
  const Tensor<float> e0 = embed(clip.frames[0]);
  double acc = 0;
  for (size_t i = 1; i < clip.frames.size(); ++i)
    acc += cosine(e0, embed(clip.frames[i]));
  return acc / double(clip.frames.size() - 1);
}

std::map<std::string, Tensor<float>> class_prototypes(
    const std::vector<synth::VideoClip>& clips, const Embedder& embed) {
  std::map<std::string, Tensor<float>> sums;
  std::map<std::string, int> counts;
  for (const auto& clip : clips)
    for (const auto& frame : clip.frames) {
      Tensor<float> e = embed(frame);
      auto it = sums.find(clip.label);
      if (it == sums.end()) {
        sums.emplace(clip.label, e);
      } else {
        for (int64_t i = 0; i < e.numel(); ++i)
          it->second.data()[i] += e.data()[i];
      }
      ++counts[clip.label];
    }
  for (auto& [label, sum] : sums) {
    const float inv = 1.0f / float(counts[label]);
    for (int64_t i = 0; i < sum.numel(); ++i) sum.data()[i] *= inv;
  }
  return sums;
}

double class_score(const synth::VideoClip& clip, const std::string& label,
                   const Embedder& embed,
                   const std::map<std::string, Tensor<float>>& prototypes) {
  const auto it = prototypes.find(label);
  if (it == prototypes.end())
    throw std::invalid_argument("class_score: unknown label " + label);
  if (clip.frames.empty())
    throw std::invalid_argument("class_score: empty clip");
  double acc = 0;
  for (const auto& frame : clip.frames)
    acc += cosine(embed(frame), it->second);
  return acc / double(clip.frames.size());
}

Track centroid_track(const std::vector<Tensor<float>>& frames,
                     float threshold) {
  Track tr;
  for (const auto& f : frames) {
    const int H = f.dim(1), W = f.dim(2);
    double sx = 0, sy = 0;
    int64_t n = 0;
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        const float dr = f.at(0, i, j) - synth::kBackground[0];
        const float dg = f.at(1, i, j) - synth::kBackground[1];
        const float db = f.at(2, i, j) - synth::kBackground[2];
        if (std::sqrt(double(dr) * dr + double(dg) * dg + double(db) * db) >
            threshold) {
          sx += synth::to_norm(j, W);
          sy += synth::to_norm(i, H);
          ++n;
        }
      }
    tr.x.push_back(n ? sx / double(n) : 0.0);
    tr.y.push_back(n ? sy / double(n) : 0.0);
  }
  return tr;
}

Track keypoint_centroid_track(const std::vector<synth::KeypointSet>& kps) {
  Track tr;
  for (const auto& ks : kps) {
    double sx = 0, sy = 0;
    const int K = ks.k();
    for (int k = 0; k < K; ++k) {
      sx += ks.positions.at(k, 0);
      sy += ks.positions.at(k, 1);
    }
    tr.x.push_back(sx / K);
    tr.y.push_back(sy / K);
  }
  return tr;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b,
               bool* defined) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("pearson: need two equal-length tracks");
  const double n = double(a.size());
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va <= 0 || vb <= 0) {
    if (defined) *defined = false;
    return 0.0;
  }
  if (defined) *defined = true;
  return cov / std::sqrt(va * vb);
}

MotionFidelity motion_fidelity(const Track& output, const Track& target) {
  if (output.x.size() != target.x.size())
    throw std::invalid_argument("motion_fidelity: track length mismatch");
  MotionFidelity mf;
  mf.x = pearson(output.x, target.x, &mf.x_defined);
  mf.y = pearson(output.y, target.y, &mf.y_defined);

  // Pool both axes' centered moments into a single coefficient, so motion
  // along one axis only still yields a defined combined score.
  const size_t n = output.x.size();
  auto mean = [n](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    return m / double(n);
  };
  const double mox = mean(output.x), moy = mean(output.y);
  const double mtx = mean(target.x), mty = mean(target.y);
  double cov = 0, vo = 0, vt = 0;
  for (size_t i = 0; i < n; ++i) {
    cov += (output.x[i] - mox) * (target.x[i] - mtx) +
           (output.y[i] - moy) * (target.y[i] - mty);
    vo += (output.x[i] - mox) * (output.x[i] - mox) +
          (output.y[i] - moy) * (output.y[i] - moy);
    vt += (target.x[i] - mtx) * (target.x[i] - mtx) +
          (target.y[i] - mty) * (target.y[i] - mty);
  }
  if (vo > 0 && vt > 0) {
    mf.combined = cov / std::sqrt(vo * vt);
    mf.combined_defined = true;
  }
  return mf;
}

MotionFidelity motion_fidelity(const pipeline::TransferResult& result) {
  if (result.adapted.empty())
    throw std::invalid_argument("motion_fidelity: no adapted keypoints");
  return motion_fidelity(centroid_track(result.output.frames),
                         keypoint_centroid_track(result.adapted));
}

double identity_proxy(const std::vector<Tensor<float>>& frames,
                      const Tensor<float>& ref) {
  if (frames.empty())
    throw std::invalid_argument("identity_proxy: no frames");
  auto hist = [](const Tensor<float>& img, int c, double* h) {
    const int64_t n = int64_t(img.dim(1)) * img.dim(2);
    for (int b = 0; b < 256; ++b) h[b] = 0;
    const float* p = img.data() + c * n;
    for (int64_t i = 0; i < n; ++i) {
      int b = int(p[i] * 255.0f + 0.5f);
      if (b < 0) b = 0;
      if (b > 255) b = 255;
      h[b] += 1.0 / double(n);
    }
  };
  double rh[3][256];
  for (int c = 0; c < 3; ++c) hist(ref, c, rh[c]);
  double acc = 0;
  for (const auto& f : frames) {
    if (f.shape() != ref.shape())
      throw std::invalid_argument("identity_proxy: frame shape mismatch");
    double fh[256];
    for (int c = 0; c < 3; ++c) {
      hist(f, c, fh);
      for (int b = 0; b < 256; ++b) acc += std::abs(fh[b] - rh[c][b]);
    }
  }
  return acc / double(frames.size() * 3);
}

}  // namespace lomo::eval
