#include <cmath>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "lomo/core/kernels.hpp"
#include "lomo/core/rng.hpp"

using namespace lomo;

namespace {

struct LaneGuard {
  kern::Lane saved = kern::active_lane();
  ~LaneGuard() { kern::force_lane(saved); }
};

std::vector<float> random_vec(Rng& rng, size_t n, float lo = -2,
                              float hi = 2) {
  std::vector<float> v(n);
  rng.fill_uniform(v.data(), int64_t(n), lo, hi);
  return v;
}

// Tolerance scaled to the magnitude of the terms that were accumulated, so
// cancellation in the true result does not turn rounding noise into a
// failure.
bool close(double got, double want, double scale, double tol = 1e-5) {
  return std::abs(got - want) <= tol * (scale + 1.0);
}

}  // namespace

TEST_CASE("gemm kernels match a naive double-precision loop on both lanes") {
  Rng rng(101);
  LaneGuard guard;
  for (const auto& [M, N, K] : {std::tuple{1, 1, 1}, std::tuple{3, 5, 7},
                               std::tuple{8, 8, 8}, std::tuple{13, 9, 17}}) {
    auto A = random_vec(rng, size_t(M) * K);
    auto B_nn = random_vec(rng, size_t(K) * N);
    auto B_nt = random_vec(rng, size_t(N) * K);
    auto C0 = random_vec(rng, size_t(M) * N);
    const float alpha = 0.7f, beta = -0.3f;

    std::vector<double> want_nn(size_t(M) * N), want_nt(size_t(M) * N),
        scale_nn(size_t(M) * N), scale_nt(size_t(M) * N);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < N; ++j) {
        double acc_nn = 0, acc_nt = 0, mag_nn = 0, mag_nt = 0;
        for (int k = 0; k < K; ++k) {
          const double a = A[size_t(i) * K + k];
          acc_nn += a * B_nn[size_t(k) * N + j];
          acc_nt += a * B_nt[size_t(j) * K + k];
          mag_nn += std::abs(a * B_nn[size_t(k) * N + j]);
          mag_nt += std::abs(a * B_nt[size_t(j) * K + k]);
        }
        const size_t idx = size_t(i) * N + j;
        want_nn[idx] = alpha * acc_nn + beta * C0[idx];
        want_nt[idx] = alpha * acc_nt + beta * C0[idx];
        scale_nn[idx] = mag_nn + std::abs(C0[idx]);
        scale_nt[idx] = mag_nt + std::abs(C0[idx]);
      }

    for (kern::Lane lane : {kern::Lane::scalar, kern::Lane::avx2}) {
      if (lane == kern::Lane::avx2 && !kern::avx2_supported()) continue;
      kern::force_lane(lane);
      std::vector<float> c(C0);
      kern::ops().gemm_nn(M, N, K, alpha, A.data(), K, B_nn.data(), N, beta,
                          c.data(), N);
      for (size_t i = 0; i < c.size(); ++i)
        CHECK(close(c[i], want_nn[i], scale_nn[i]));
      c = C0;
      kern::ops().gemm_nt(M, N, K, alpha, A.data(), K, B_nt.data(), K, beta,
                          c.data(), N);
      for (size_t i = 0; i < c.size(); ++i)
        CHECK(close(c[i], want_nt[i], scale_nt[i]));
    }
  }
}

TEST_CASE("avx2 lane agrees with the scalar lane on every op") {
  if (!kern::avx2_supported()) {
    MESSAGE("avx2 not supported on this machine; lane equivalence skipped");
    return;
  }
  Rng rng(102);
  LaneGuard guard;
  const auto& sc = kern::scalar_ops();
  const auto& vx = kern::avx2_ops();

  // Sizes straddling the 8-lane width, including remainder tails.
  for (size_t n : {size_t(1), size_t(7), size_t(8), size_t(9), size_t(31),
                   size_t(64), size_t(1000)}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    std::vector<float> r1(n), r2(n);

    sc.add(a.data(), b.data(), r1.data(), n);
    vx.add(a.data(), b.data(), r2.data(), n);
    CHECK(r1 == r2);
    sc.sub(a.data(), b.data(), r1.data(), n);
    vx.sub(a.data(), b.data(), r2.data(), n);
    CHECK(r1 == r2);
    sc.mul(a.data(), b.data(), r1.data(), n);
    vx.mul(a.data(), b.data(), r2.data(), n);
    CHECK(r1 == r2);

    r1 = b;
    r2 = b;
    sc.axpy(0.37f, a.data(), r1.data(), n);
    vx.axpy(0.37f, a.data(), r2.data(), n);
    for (size_t i = 0; i < n; ++i) CHECK(close(r2[i], r1[i], 2.0, 1e-6));

    r1 = a;
    r2 = a;
    sc.scal(-1.83f, r1.data(), n);
    vx.scal(-1.83f, r2.data(), n);
    CHECK(r1 == r2);

    double mag = 0, magsq = 0;
    for (size_t i = 0; i < n; ++i) {
      mag += std::abs(double(a[i]));
      magsq += double(a[i]) * a[i];
    }
    CHECK(close(vx.sum(a.data(), n), sc.sum(a.data(), n), mag));
    CHECK(close(vx.dot(a.data(), b.data(), n), sc.dot(a.data(), b.data(), n),
                2 * mag));
    CHECK(close(vx.sumsq(a.data(), n), sc.sumsq(a.data(), n), magsq));

    sc.vexp(a.data(), r1.data(), n);
    vx.vexp(a.data(), r2.data(), n);
    for (size_t i = 0; i < n; ++i) CHECK(close(r2[i], r1[i], r1[i], 2e-6));

    sc.silu(a.data(), r1.data(), n);
    vx.silu(a.data(), r2.data(), n);
    for (size_t i = 0; i < n; ++i)
      CHECK(close(r2[i], r1[i], std::abs(r1[i]), 2e-6));

    auto gy = random_vec(rng, n);
    sc.silu_bwd(a.data(), gy.data(), r1.data(), n);
    vx.silu_bwd(a.data(), gy.data(), r2.data(), n);
    for (size_t i = 0; i < n; ++i)
      CHECK(close(r2[i], r1[i], std::abs(r1[i]), 2e-6));
  }

  // gemm equivalence on shapes with and without remainder columns
  for (const auto& [M, N, K] :
       {std::tuple{5, 3, 11}, std::tuple{16, 16, 16}, std::tuple{7, 25, 9}}) {
    auto A = random_vec(rng, size_t(M) * K);
    auto B = random_vec(rng, size_t(K) * N);
    std::vector<float> c1(size_t(M) * N, 0.5f), c2(c1);
    sc.gemm_nn(M, N, K, 1.1f, A.data(), K, B.data(), N, 0.2f, c1.data(), N);
    vx.gemm_nn(M, N, K, 1.1f, A.data(), K, B.data(), N, 0.2f, c2.data(), N);
    for (size_t i = 0; i < c1.size(); ++i)
      CHECK(close(c2[i], c1[i], 4.0 * K));
    std::vector<float> d1(size_t(M) * N, -0.25f), d2(d1);
    auto Bt = random_vec(rng, size_t(N) * K);
    sc.gemm_nt(M, N, K, 0.9f, A.data(), K, Bt.data(), K, 1.0f, d1.data(), N);
    vx.gemm_nt(M, N, K, 0.9f, A.data(), K, Bt.data(), K, 1.0f, d2.data(), N);
    for (size_t i = 0; i < d1.size(); ++i)
      CHECK(close(d2[i], d1[i], 4.0 * K));
  }

  // softmax rows: both lanes normalize to 1 and agree elementwise
  for (int rows : {1, 4}) {
    for (int cols : {1, 5, 8, 19}) {
      auto x = random_vec(rng, size_t(rows) * cols, -4, 4);
      auto y1 = x, y2 = x;
      sc.softmax_rows(y1.data(), rows, cols);
      vx.softmax_rows(y2.data(), rows, cols);
      for (size_t i = 0; i < y1.size(); ++i)
        CHECK(std::abs(y1[i] - y2[i]) < 1e-5);
      for (int r = 0; r < rows; ++r) {
        double s = 0;
        for (int cc = 0; cc < cols; ++cc) s += y1[size_t(r) * cols + cc];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
      }
    }
  }

  // adam: one update step moves weights and moments identically
  const size_t n = 37;
  auto w1 = random_vec(rng, n), g = random_vec(rng, n);
  auto m1 = random_vec(rng, n, 0, 0.1f), v1 = random_vec(rng, n, 0.01f, 0.1f);
  auto w2 = w1, m2 = m1, v2 = v1;
  sc.adam(w1.data(), g.data(), m1.data(), v1.data(), n, 1e-3f, 0.9f, 0.999f,
          1e-8f, 1.5f, 1.2f);
  vx.adam(w2.data(), g.data(), m2.data(), v2.data(), n, 1e-3f, 0.9f, 0.999f,
          1e-8f, 1.5f, 1.2f);
  for (size_t i = 0; i < n; ++i) {
    CHECK(std::abs(w1[i] - w2[i]) < 1e-6);
    CHECK(std::abs(m1[i] - m2[i]) < 1e-6);
    CHECK(std::abs(v1[i] - v2[i]) < 1e-6);
  }
}

TEST_CASE("scalar kernels compute the expected closed forms") {
  Rng rng(103);
  const size_t n = 23;
  auto x = random_vec(rng, n);
  std::vector<float> y(n);
  const auto& sc = kern::scalar_ops();

  sc.silu(x.data(), y.data(), n);
  for (size_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-double(x[i])));
    CHECK(y[i] == doctest::Approx(x[i] * s).epsilon(1e-6));
  }

  sc.vexp(x.data(), y.data(), n);
  for (size_t i = 0; i < n; ++i)
    CHECK(y[i] == doctest::Approx(std::exp(double(x[i]))).epsilon(1e-6));

  double acc = 0;
  for (size_t i = 0; i < n; ++i) acc += double(x[i]) * x[i];
  CHECK(sc.sumsq(x.data(), n) == doctest::Approx(acc).epsilon(1e-5));

  // adam closed form, one step from zero moments
  float w = 0.5f, gr = 0.2f, m = 0.0f, v = 0.0f;
  const float lr = 0.01f, b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  const float c1 = 1.0f / (1.0f - b1), c2 = 1.0f / (1.0f - b2);
  sc.adam(&w, &gr, &m, &v, 1, lr, b1, b2, eps, c1, c2);
  CHECK(m == doctest::Approx((1 - b1) * gr));
  CHECK(v == doctest::Approx((1 - b2) * gr * gr));
  // bias-corrected moments reduce to m_hat = gr, v_hat = gr^2
  CHECK(w == doctest::Approx(0.5f - lr * gr / (std::abs(gr) + eps))
                 .epsilon(1e-4));
}

TEST_CASE("forced lane is visible and restored") {
  LaneGuard guard;
  kern::force_lane(kern::Lane::scalar);
  CHECK(kern::active_lane() == kern::Lane::scalar);
  CHECK(kern::lane_name(kern::active_lane()) == "scalar");
  if (kern::avx2_supported()) {
    kern::force_lane(kern::Lane::avx2);
    CHECK(kern::active_lane() == kern::Lane::avx2);
    CHECK(kern::lane_name(kern::active_lane()) == "avx2");
  }
}
