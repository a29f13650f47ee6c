#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "lomo/core/rng.hpp"
#include "lomo/flow/geometry.hpp"
#include "support.hpp"

using namespace lomo;
using namespace lomo::flow;

namespace {

synth::KeypointSet make_kps(const std::vector<std::array<float, 2>>& pos,
                            const std::vector<std::array<float, 4>>& jac = {}) {
  synth::KeypointSet ks;
  const int K = int(pos.size());
  ks.positions = Tensor<float>({K, 2});
  ks.jacobians = Tensor<float>({K, 2, 2});
  for (int k = 0; k < K; ++k) {
    ks.positions.at(k, 0) = pos[size_t(k)][0];
    ks.positions.at(k, 1) = pos[size_t(k)][1];
    const std::array<float, 4> j =
        jac.empty() ? std::array<float, 4>{1, 0, 0, 1} : jac[size_t(k)];
    ks.jacobians.at(k, 0, 0) = j[0];
    ks.jacobians.at(k, 0, 1) = j[1];
    ks.jacobians.at(k, 1, 0) = j[2];
    ks.jacobians.at(k, 1, 1) = j[3];
  }
  return ks;
}

// Independent bilinear sampler in double precision.
Tensor<float> warp_oracle(const Tensor<float>& latent, const DenseFlow& flow) {
  const int C = latent.dim(0), H = flow.h(), W = flow.w();
  Tensor<float> out({C, H, W});
  auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      const double px = j + double(flow.dx(i, j)) * 0.5 * W;
      const double py = i + double(flow.dy(i, j)) * 0.5 * H;
      const int x0 = int(std::floor(px)), y0 = int(std::floor(py));
      const double fx = px - x0, fy = py - y0;
      const int xa = clampi(x0, W - 1), xb = clampi(x0 + 1, W - 1);
      const int ya = clampi(y0, H - 1), yb = clampi(y0 + 1, H - 1);
      for (int c = 0; c < C; ++c) {
        const double v00 = latent.at(c, ya, xa), v01 = latent.at(c, ya, xb);
        const double v10 = latent.at(c, yb, xa), v11 = latent.at(c, yb, xb);
        out.at(c, i, j) = float((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                fy * ((1 - fx) * v10 + fx * v11));
      }
    }
  return out;
}

// Hull oracle: directed edge (a,b) is a hull edge iff every other point lies
// strictly to its left. Endpoints of such edges, walked from the smallest
// point, give the vertex cycle.
std::vector<std::array<float, 2>> hull_oracle(
    std::vector<std::array<float, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const size_t n = pts.size();
  std::vector<std::pair<size_t, size_t>> edges;
  for (size_t a = 0; a < n; ++a)
    for (size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      bool all_left = true;
      for (size_t r = 0; r < n && all_left; ++r) {
        if (r == a || r == b) continue;
        const double cr =
            (double(pts[b][0]) - pts[a][0]) * (double(pts[r][1]) - pts[a][1]) -
            (double(pts[b][1]) - pts[a][1]) * (double(pts[r][0]) - pts[a][0]);
        all_left = cr > 0;
      }
      if (all_left) edges.emplace_back(a, b);
    }
  // walk the cycle from the lexicographically smallest vertex (pts[0] would
  // be it if on the hull; find the smallest edge start instead)
  size_t start = n;
  for (const auto& e : edges)
    if (start == n || pts[e.first] < pts[start]) start = e.first;
  std::vector<std::array<float, 2>> cycle;
  size_t cur = start;
  do {
    cycle.push_back(pts[cur]);
    size_t next = n;
    for (const auto& e : edges)
      if (e.first == cur) next = e.second;
    REQUIRE(next != n);
    cur = next;
  } while (cur != start && cycle.size() <= n);
  return cycle;
}

}  // namespace

TEST_CASE("zero flow reproduces the input exactly") {
  Rng rng(301);
  Tensor<float> latent({4, 8, 8});
  testutil::fill_random(latent, rng, -2.0f, 2.0f);
  DenseFlow flow(8, 8);
  auto out = warp(latent, flow);
  CHECK(testutil::bitwise_equal(out, latent));
}

TEST_CASE("warp matches an independent bilinear sampler on random cases") {
  Rng rng(302);
  for (int t = 0; t < 200; ++t) {
    const int H = int(rng.uniform_int(3, 13));
    const int W = int(rng.uniform_int(3, 13));
    const int C = int(rng.uniform_int(1, 5));
    Tensor<float> latent({C, H, W});
    testutil::fill_random(latent, rng, -1.0f, 1.0f);
    DenseFlow flow(H, W);
    // +-0.6 normalized units sends samples well past the border sometimes,
    // exercising the clamping paths
    testutil::fill_random(flow.d, rng, -0.6f, 0.6f);
    auto got = warp(latent, flow);
    auto want = warp_oracle(latent, flow);
    CHECK(testutil::max_abs_diff(got, want) < 1e-6);
  }
}

TEST_CASE("warp rejects a latent that does not match the grid") {
  Tensor<float> latent({2, 4, 4});
  DenseFlow flow(5, 4);
  CHECK_THROWS_WITH_AS(warp(latent, flow),
                       doctest::Contains("does not match flow grid"),
                       std::invalid_argument);
}

TEST_CASE("constant flow of one cell shifts the interior") {
  // dx of 2/W normalized units is exactly one cell to the right
  const int H = 4, W = 8;
  Tensor<float> latent({1, H, W});
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) latent.at(0, i, j) = float(10 * i + j);
  DenseFlow flow(H, W);
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) flow.dx(i, j) = 2.0f / W;
  auto out = warp(latent, flow);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j + 1 < W; ++j)
      CHECK(out.at(0, i, j) == latent.at(0, i, j + 1));
    CHECK(out.at(0, i, W - 1) == latent.at(0, i, W - 1));  // border clamp
  }
}

TEST_CASE("warp flow gradient matches finite differences") {
  Rng rng(303);
  const int C = 2, H = 6, W = 7;
  Tensor<float> latent({C, H, W});
  testutil::fill_random(latent, rng, -1.0f, 1.0f);

  DenseFlow flow(H, W);
  // keep each sample's fractional position away from cell boundaries so the
  // finite-difference step never crosses a floor discontinuity
  for (int i = 0; i < H; ++i)
    for (int j = 0; j < W; ++j) {
      flow.dx(i, j) = (0.3f + 0.4f * float(rng.uniform())) * 2.0f / W;
      flow.dy(i, j) = (0.3f + 0.4f * float(rng.uniform())) * 2.0f / H;
    }

  Tensor<float> wsum({C, H, W});
  testutil::fill_random(wsum, rng, -1.0f, 1.0f);
  auto loss = [&] {
    auto out = warp(latent, flow);
    double s = 0;
    for (int64_t i = 0; i < out.numel(); ++i) s += double(wsum[i]) * out[i];
    return s;
  };
  auto gflow = warp_backward_flow(latent, flow, wsum);

  const float h = 1e-3f;
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int64_t idx = rng.uniform_int(0, int(gflow.numel()));
    const double an = gflow[idx];
    if (std::abs(an) < 5e-2) continue;
    const float keep = flow.d[idx];
    flow.d[idx] = keep + h;
    const double lp = loss();
    flow.d[idx] = keep - h;
    const double lm = loss();
    flow.d[idx] = keep;
    const double fd = (lp - lm) / (2 * h);
    CHECK(std::abs(fd - an) / std::max(std::abs(fd), std::abs(an)) < 2e-2);
    ++checked;
  }
  CHECK(checked > 5);
}

TEST_CASE("flow json round-trip") {
  Rng rng(304);
  DenseFlow f(3, 5);
  testutil::fill_random(f.d, rng, -0.5f, 0.5f);
  auto j = flow_to_json(f);
  auto back = flow_from_json(j);
  CHECK(back.h() == 3);
  CHECK(back.w() == 5);
  CHECK(testutil::bitwise_equal(back.d, f.d));

  j["data"].erase(0);
  CHECK_THROWS_WITH(flow_from_json(j), doctest::Contains("2*h*w"));
}

TEST_CASE("gaussian heatmaps follow the closed form and peak at the keypoint") {
  const int h = 8, w = 8;
  const float sigma = 0.3f;
  // keypoint exactly at the center of cell (2,5)
  Tensor<float> kp({1, 2});
  kp.at(0, 0) = grid_x(5, w);
  kp.at(0, 1) = grid_y(2, h);
  auto maps = gaussian_heatmaps(kp, h, w, sigma);
  REQUIRE(maps.shape() == std::vector<int>{1, h, w});

  CHECK(maps.at(0, 2, 5) == doctest::Approx(1.0f));
  float peak = -1;
  int pi = -1, pj = -1;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const float dx = grid_x(j, w) - kp.at(0, 0);
      const float dy = grid_y(i, h) - kp.at(0, 1);
      const float want = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      CHECK(maps.at(0, i, j) == doctest::Approx(want).epsilon(1e-6));
      if (maps.at(0, i, j) > peak) {
        peak = maps.at(0, i, j);
        pi = i;
        pj = j;
      }
    }
  CHECK(pi == 2);
  CHECK(pj == 5);

  CHECK_THROWS_WITH(gaussian_heatmaps(kp, h, w, 0.0f),
                    doctest::Contains("sigma"));
  CHECK_THROWS_WITH(gaussian_heatmaps(Tensor<float>({3}), h, w, sigma),
                    doctest::Contains("(K,2)"));
}

TEST_CASE("convex hull on exact cases") {
  using P = std::array<float, 2>;
  const std::vector<P> square = {{-1, -1}, {1, -1}, {1, 1},
                                 {-1, 1},  {0, 0},  {0.5f, -0.25f}};
  auto hull = convex_hull(square);
  REQUIRE(hull.size() == 4);
  CHECK(hull[0] == P{-1, -1});
  CHECK(hull[1] == P{1, -1});
  CHECK(hull[2] == P{1, 1});
  CHECK(hull[3] == P{-1, 1});

  // collinear boundary point is dropped
  auto with_mid = square;
  with_mid.push_back({0, -1});
  auto hull2 = convex_hull(with_mid);
  CHECK(hull2 == hull);

  // duplicates collapse before the distinct-count check
  CHECK_THROWS_WITH(convex_hull({{0, 0}, {0, 0}, {1, 1}, {1, 1}}),
                    doctest::Contains("3 distinct"));
  CHECK_THROWS_WITH(convex_hull({{0, 0}, {1, 1}, {2, 2}, {3, 3}}),
                    doctest::Contains("collinear"));
}

TEST_CASE("convex hull matches the all-pairs oracle on random sets") {
  Rng rng(305);
  for (int t = 0; t < 200; ++t) {
    const int n = int(rng.uniform_int(3, 30));
    std::vector<std::array<float, 2>> pts(static_cast<size_t>(n));
    for (auto& p : pts) {
      p[0] = float(rng.uniform(-1.0, 1.0));
      p[1] = float(rng.uniform(-1.0, 1.0));
    }
    auto got = convex_hull(pts);
    auto want = hull_oracle(pts);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i][0] == want[i][0]);
      CHECK(got[i][1] == want[i][1]);
    }
  }
}

TEST_CASE("local affines with identity driving jacobians reduce to J_ref") {
  auto ref = make_kps({{0.1f, 0.2f}, {-0.3f, 0.4f}},
                      {{0.0f, -1.0f, 1.0f, 0.0f}, {2.0f, 0.0f, 0.0f, 2.0f}});
  auto drv = make_kps({{0.5f, -0.5f}, {0.0f, 0.0f}});
  auto affs = local_affines(ref, drv);
  REQUIRE(affs.size() == 2);
  CHECK(affs[0].source == std::array<float, 2>{0.5f, -0.5f});
  CHECK(affs[0].target == std::array<float, 2>{0.1f, 0.2f});
  CHECK(affs[0].linear == std::array<float, 4>{0.0f, -1.0f, 1.0f, 0.0f});
  CHECK(affs[1].linear == std::array<float, 4>{2.0f, 0.0f, 0.0f, 2.0f});

  // T(z) = target + linear (z - source)
  auto p = affs[0].apply(0.7f, -0.3f);
  // rx = 0.2, ry = 0.2; rot90: (0*rx + -1*ry, 1*rx + 0*ry) = (-0.2, 0.2)
  CHECK(p[0] == doctest::Approx(0.1f - 0.2f));
  CHECK(p[1] == doctest::Approx(0.2f + 0.2f));
}

TEST_CASE("singular driving jacobian error names the keypoint") {
  auto ref = make_kps({{0, 0}, {0.5f, 0.5f}});
  auto drv = make_kps({{0, 0}, {0.5f, 0.5f}},
                      {{1, 0, 0, 1}, {0, 0, 0, 0}});
  CHECK_THROWS_WITH(local_affines(ref, drv), doctest::Contains("keypoint 1"));

  auto bad_count = make_kps({{0, 0}});
  CHECK_THROWS_WITH(local_affines(ref, bad_count),
                    doctest::Contains("counts differ"));
}

TEST_CASE("candidate displacements put the identity last and zero") {
  auto ref = make_kps({{0.2f, 0.0f}, {-0.4f, 0.3f}});
  auto drv = make_kps({{0.0f, 0.1f}, {0.1f, -0.2f}});
  auto affs = local_affines(ref, drv);
  const int h = 6, w = 5;
  auto disp = candidate_displacements(affs, h, w);
  REQUIRE(disp.shape() == std::vector<int>{3, 2, h, w});

  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      CHECK(disp.at(2, 0, i, j) == 0.0f);
      CHECK(disp.at(2, 1, i, j) == 0.0f);
      for (int k = 0; k < 2; ++k) {
        const auto p = affs[size_t(k)].apply(grid_x(j, w), grid_y(i, h));
        CHECK(disp.at(k, 0, i, j) ==
              doctest::Approx(p[0] - grid_x(j, w)).epsilon(1e-6));
        CHECK(disp.at(k, 1, i, j) ==
              doctest::Approx(p[1] - grid_y(i, h)).epsilon(1e-6));
      }
    }
}

TEST_CASE("keypoint adaptation: zero driving motion keeps the source pose") {
  auto src = make_kps({{-0.5f, -0.5f}, {0.5f, -0.25f}, {0.0f, 0.5f}},
                      {{0, -1, 1, 0}, {1, 0, 0, 1}, {2, 0, 0, 1}});
  auto drv0 = make_kps({{-0.25f, -0.25f}, {0.25f, 0.0f}, {0.0f, 0.25f}});
  std::vector<synth::KeypointSet> seq = {drv0, drv0, drv0};
  auto adapted = adapt_keypoints(src, seq);
  REQUIRE(adapted.size() == 3);
  for (const auto& ks : adapted) {
    CHECK(testutil::bitwise_equal(ks.positions, src.positions));
    CHECK(testutil::bitwise_equal(ks.jacobians, src.jacobians));
  }
}

TEST_CASE("keypoint adaptation: doubled driving hull halves the motion") {
  // driving keypoints are the source ones scaled by 2, so the bounding box
  // ratio is exactly 0.5 on both axes
  const std::vector<std::array<float, 2>> base = {
      {-0.25f, -0.25f}, {0.25f, -0.25f}, {0.0f, 0.25f}};
  auto src = make_kps(base);
  std::vector<std::array<float, 2>> big = base;
  for (auto& p : big) {
    p[0] *= 2;
    p[1] *= 2;
  }
  auto drv0 = make_kps(big);
  auto drv1 = make_kps({{big[0][0] + 0.25f, big[0][1] - 0.5f},
                        {big[1][0] + 0.25f, big[1][1] - 0.5f},
                        {big[2][0] + 0.25f, big[2][1] - 0.5f}});
  auto adapted = adapt_keypoints(src, {drv0, drv1});
  for (int k = 0; k < 3; ++k) {
    CHECK(adapted[1].positions.at(k, 0) == base[size_t(k)][0] + 0.125f);
    CHECK(adapted[1].positions.at(k, 1) == base[size_t(k)][1] - 0.25f);
  }
}

TEST_CASE("keypoint adaptation: matching frame 0 reproduces the driving") {
  auto f0 = make_kps({{-0.4f, -0.3f}, {0.4f, -0.3f}, {0.0f, 0.45f}},
                     {{1, 0, 0, 1}, {0, -1, 1, 0}, {1, 0, 0, 2}});
  auto f1 = make_kps({{-0.3f, -0.35f}, {0.5f, -0.2f}, {0.1f, 0.4f}},
                     {{0, 1, -1, 0}, {1, 1, 0, 1}, {3, 0, 0, 1}});
  auto adapted = adapt_keypoints(f0, {f0, f1});
  CHECK(testutil::max_abs_diff(adapted[0].positions, f0.positions) == 0.0);
  CHECK(testutil::max_abs_diff(adapted[1].positions, f1.positions) < 1e-6);
  CHECK(testutil::max_abs_diff(adapted[1].jacobians, f1.jacobians) < 1e-5);
}

TEST_CASE("keypoint adaptation rejects degenerate hulls") {
  auto flat = make_kps({{-0.5f, 0.0f}, {0.0f, 0.0f}, {0.5f, 0.0f}});
  auto ok = make_kps({{-0.25f, -0.25f}, {0.25f, 0.0f}, {0.0f, 0.25f}});
  CHECK_THROWS(adapt_keypoints(flat, {ok}));
  CHECK_THROWS(adapt_keypoints(ok, {flat}));
  CHECK_THROWS_WITH(adapt_keypoints(ok, {}), doctest::Contains("empty"));
}
