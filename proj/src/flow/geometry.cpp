#include "lomo/flow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lomo::flow {
namespace {

std::array<float, 4> inv2x2(const std::array<float, 4>& m, double min_det,
                            const std::string& who) {
  const double det = static_cast<double>(m[0]) * m[3] -
                     static_cast<double>(m[1]) * m[2];
  if (std::abs(det) <= min_det)
    throw std::invalid_argument(who);
  const float id = static_cast<float>(1.0 / det);
  return {m[3] * id, -m[1] * id, -m[2] * id, m[0] * id};
}

std::array<float, 4> mat_mul(const std::array<float, 4>& a,
                             const std::array<float, 4>& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

std::array<float, 4> jac_of(const Tensor<float>& jac, int k) {
  return {jac.at(k, 0, 0), jac.at(k, 0, 1), jac.at(k, 1, 0), jac.at(k, 1, 1)};
}

double cross(const std::array<float, 2>& o, const std::array<float, 2>& a,
             const std::array<float, 2>& b) {
  return (static_cast<double>(a[0]) - o[0]) * (static_cast<double>(b[1]) - o[1]) -
         (static_cast<double>(a[1]) - o[1]) * (static_cast<double>(b[0]) - o[0]);
}

}  // namespace

nlohmann::json flow_to_json(const DenseFlow& f) {
  nlohmann::json data = nlohmann::json::array();
  for (int i = 0; i < f.h(); ++i)
    for (int j = 0; j < f.w(); ++j) {
      data.push_back(f.dx(i, j));
      data.push_back(f.dy(i, j));
    }
  return nlohmann::json{{"h", f.h()}, {"w", f.w()}, {"data", std::move(data)}};
}

DenseFlow flow_from_json(const nlohmann::json& j) {
  const int h = j.at("h").get<int>(), w = j.at("w").get<int>();
  const auto& data = j.at("data");
  if (static_cast<int>(data.size()) != 2 * h * w)
    throw std::runtime_error("flow_from_json: data length != 2*h*w");
  DenseFlow f(h, w);
  size_t at = 0;
  for (int i = 0; i < h; ++i)
    for (int j2 = 0; j2 < w; ++j2) {
      f.dx(i, j2) = data.at(at++).get<float>();
      f.dy(i, j2) = data.at(at++).get<float>();
    }
  return f;
}

Tensor<float> gaussian_heatmaps(const Tensor<float>& kp, int h, int w,
                                float sigma) {
  if (!(sigma > 0))
    throw std::invalid_argument("gaussian_heatmaps: sigma must be > 0");
  if (kp.ndim() != 2 || kp.dim(1) != 2)
    throw std::invalid_argument("gaussian_heatmaps: keypoints must be (K,2)");
  const int K = kp.dim(0);
  Tensor<float> maps({K, h, w});
  const float inv = 1.0f / (2.0f * sigma * sigma);
  for (int k = 0; k < K; ++k) {
    const float kx = kp.at(k, 0), ky = kp.at(k, 1);
    for (int i = 0; i < h; ++i) {
      const float dy = grid_y(i, h) - ky;
      for (int j = 0; j < w; ++j) {
        const float dx = grid_x(j, w) - kx;
        maps.at(k, i, j) = std::exp(-(dx * dx + dy * dy) * inv);
      }
    }
  }
  return maps;
}

std::vector<LocalAffine> local_affines(const synth::KeypointSet& kp_ref,
                                       const synth::KeypointSet& kp_drv) {
  if (kp_ref.k() != kp_drv.k())
    throw std::invalid_argument("local_affines: keypoint counts differ");
  std::vector<LocalAffine> out;
  out.reserve(static_cast<size_t>(kp_ref.k()));
  for (int k = 0; k < kp_ref.k(); ++k) {
    const auto jd_inv =
        inv2x2(jac_of(kp_drv.jacobians, k), 1e-6,
               "local_affines: singular driving jacobian at keypoint " +
                   std::to_string(k));
    LocalAffine t;
    t.source = {kp_drv.positions.at(k, 0), kp_drv.positions.at(k, 1)};
    t.target = {kp_ref.positions.at(k, 0), kp_ref.positions.at(k, 1)};
    t.linear = mat_mul(jac_of(kp_ref.jacobians, k), jd_inv);
    out.push_back(t);
  }
  return out;
}

Tensor<float> candidate_displacements(const std::vector<LocalAffine>& affines,
                                      int h, int w) {
  const int K = static_cast<int>(affines.size());
  Tensor<float> disp({K + 1, 2, h, w});  // identity candidate stays zero
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < h; ++i) {
      const float gy = grid_y(i, h);
      for (int j = 0; j < w; ++j) {
        const float gx = grid_x(j, w);
        const auto p = affines[static_cast<size_t>(k)].apply(gx, gy);
        disp.at(k, 0, i, j) = p[0] - gx;
        disp.at(k, 1, i, j) = p[1] - gy;
      }
    }
  return disp;
}

Tensor<float> warp(const Tensor<float>& latent, const DenseFlow& flow) {
  if (latent.ndim() != 3 || latent.dim(1) != flow.h() ||
      latent.dim(2) != flow.w())
    throw std::invalid_argument("warp: latent " + latent.shape_str() +
                                " does not match flow grid");
  const int C = latent.dim(0), H = flow.h(), W = flow.w();
  Tensor<float> out({C, H, W});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      // Normalized displacement expressed directly in cell units so that a
      // zero flow reproduces the input bit-for-bit.
      const float px = static_cast<float>(j) + flow.dx(i, j) * 0.5f * W;
      const float py = static_cast<float>(i) + flow.dy(i, j) * 0.5f * H;
      const int x0 = static_cast<int>(std::floor(px));
      const int y0 = static_cast<int>(std::floor(py));
      const float fx = px - static_cast<float>(x0);
      const float fy = py - static_cast<float>(y0);
      const int xa = std::clamp(x0, 0, W - 1), xb = std::clamp(x0 + 1, 0, W - 1);
      const int ya = std::clamp(y0, 0, H - 1), yb = std::clamp(y0 + 1, 0, H - 1);
      for (int c = 0; c < C; ++c) {
        const float v00 = latent.at(c, ya, xa), v01 = latent.at(c, ya, xb);
        const float v10 = latent.at(c, yb, xa), v11 = latent.at(c, yb, xb);
        out.at(c, i, j) = (1 - fy) * ((1 - fx) * v00 + fx * v01) +
                          fy * ((1 - fx) * v10 + fx * v11);
      }
    }
  return out;
}

Tensor<float> warp_backward_flow(const Tensor<float>& latent,
                                 const DenseFlow& flow,
                                 const Tensor<float>& gout) {
  const int C = latent.dim(0), H = flow.h(), W = flow.w();
  Tensor<float> gflow({2, H, W});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const float px = static_cast<float>(j) + flow.dx(i, j) * 0.5f * W;
      const float py = static_cast<float>(i) + flow.dy(i, j) * 0.5f * H;
      const int x0 = static_cast<int>(std::floor(px));
      const int y0 = static_cast<int>(std::floor(py));
      const float fx = px - static_cast<float>(x0);
      const float fy = py - static_cast<float>(y0);
      const int xa = std::clamp(x0, 0, W - 1), xb = std::clamp(x0 + 1, 0, W - 1);
      const int ya = std::clamp(y0, 0, H - 1), yb = std::clamp(y0 + 1, 0, H - 1);
      float gpx = 0, gpy = 0;
      for (int c = 0; c < C; ++c) {
        const float g = gout.at(c, i, j);
        const float v00 = latent.at(c, ya, xa), v01 = latent.at(c, ya, xb);
        const float v10 = latent.at(c, yb, xa), v11 = latent.at(c, yb, xb);
        gpx += g * ((1 - fy) * (v01 - v00) + fy * (v11 - v10));
        gpy += g * ((1 - fx) * (v10 - v00) + fx * (v11 - v01));
      }
      gflow.at(0, i, j) = gpx * 0.5f * W;
      gflow.at(1, i, j) = gpy * 0.5f * H;
    }
  return gflow;
}

std::vector<std::array<float, 2>> convex_hull(
    const std::vector<std::array<float, 2>>& pts_in) {
  std::vector<std::array<float, 2>> pts = pts_in;
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const size_t n = pts.size();
  if (n < 3)
    throw std::invalid_argument(
        "convex_hull: need at least 3 distinct points");
  std::vector<std::array<float, 2>> hull(2 * n);
  size_t m = 0;
  for (size_t i = 0; i < n; ++i) {  // lower chain
    while (m >= 2 && cross(hull[m - 2], hull[m - 1], pts[i]) <= 0) --m;
    hull[m++] = pts[i];
  }
  const size_t lower = m + 1;
  for (size_t i = n - 1; i-- > 0;) {  // upper chain
    while (m >= lower && cross(hull[m - 2], hull[m - 1], pts[i]) <= 0) --m;
    hull[m++] = pts[i];
  }
  hull.resize(m - 1);  // last point repeats the first
  if (hull.size() < 3)
    throw std::invalid_argument("convex_hull: degenerate (collinear) input");
  return hull;
}

std::vector<synth::KeypointSet> adapt_keypoints(
    const synth::KeypointSet& kp_src_frame0,
    const std::vector<synth::KeypointSet>& kp_drv_seq) {
  if (kp_drv_seq.empty())
    throw std::invalid_argument("adapt_keypoints: empty driving sequence");
  const int K = kp_src_frame0.k();
  for (const auto& ks : kp_drv_seq)
    if (ks.k() != K)
      throw std::invalid_argument("adapt_keypoints: keypoint counts differ");

  auto to_points = [K](const synth::KeypointSet& ks) {
    std::vector<std::array<float, 2>> pts;
    pts.reserve(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k)
      pts.push_back({ks.positions.at(k, 0), ks.positions.at(k, 1)});
    return pts;
  };
  auto bbox_scale = [](const std::vector<std::array<float, 2>>& hull,
                       const char* who) {
    float lo_x = hull[0][0], hi_x = hull[0][0];
    float lo_y = hull[0][1], hi_y = hull[0][1];
    for (const auto& p : hull) {
      lo_x = std::min(lo_x, p[0]);
      hi_x = std::max(hi_x, p[0]);
      lo_y = std::min(lo_y, p[1]);
      hi_y = std::max(hi_y, p[1]);
    }
    const float w = hi_x - lo_x, h = hi_y - lo_y;
    if (!(w > 1e-6f) || !(h > 1e-6f))
      throw std::invalid_argument(std::string("adapt_keypoints: degenerate ") +
                                  who + " hull (zero width or height)");
    return std::array<float, 2>{w, h};
  };

  const auto src_wh = bbox_scale(convex_hull(to_points(kp_src_frame0)), "source");
  const auto drv_wh = bbox_scale(convex_hull(to_points(kp_drv_seq[0])), "driving");
  const float sx = src_wh[0] / drv_wh[0];
  const float sy = src_wh[1] / drv_wh[1];

  std::vector<std::array<float, 4>> rel(static_cast<size_t>(K));
  for (int k = 0; k < K; ++k) {
    const auto j0_inv =
        inv2x2(jac_of(kp_drv_seq[0].jacobians, k), 1e-6,
               "adapt_keypoints: singular driving jacobian at keypoint " +
                   std::to_string(k));
    rel[static_cast<size_t>(k)] =
        mat_mul(jac_of(kp_src_frame0.jacobians, k), j0_inv);
  }

  std::vector<synth::KeypointSet> out;
  out.reserve(kp_drv_seq.size());
  for (const auto& drv : kp_drv_seq) {
    synth::KeypointSet ks;
    ks.positions = Tensor<float>({K, 2});
    ks.jacobians = Tensor<float>({K, 2, 2});
    for (int k = 0; k < K; ++k) {
      ks.positions.at(k, 0) =
          kp_src_frame0.positions.at(k, 0) +
          sx * (drv.positions.at(k, 0) - kp_drv_seq[0].positions.at(k, 0));
      ks.positions.at(k, 1) =
          kp_src_frame0.positions.at(k, 1) +
          sy * (drv.positions.at(k, 1) - kp_drv_seq[0].positions.at(k, 1));
      const auto j = mat_mul(rel[static_cast<size_t>(k)], jac_of(drv.jacobians, k));
      ks.jacobians.at(k, 0, 0) = j[0];
      ks.jacobians.at(k, 0, 1) = j[1];
      ks.jacobians.at(k, 1, 0) = j[2];
      ks.jacobians.at(k, 1, 1) = j[3];
    }
    out.push_back(std::move(ks));
  }
  return out;
}

}  // namespace lomo::flow
