#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "lomo/core/rng.hpp"
#include "lomo/diffusion/schedule.hpp"
#include "support.hpp"

using namespace lomo;
using namespace lomo::diffusion;

TEST_CASE("linear beta schedule hits the endpoints and interpolates") {
  auto s = make_schedule();
  REQUIRE(s.T == 1000);
  REQUIRE(int(s.betas.size()) == 1000);
  CHECK(s.betas[0] == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK(s.betas[999] == doctest::Approx(2e-2).epsilon(1e-9));

  for (int t : {0, 1, 250, 499, 500, 998, 999}) {
    const double want = 1e-4 + (2e-2 - 1e-4) * double(t) / 999.0;
    CHECK(s.betas[size_t(t)] == doctest::Approx(want).epsilon(1e-6));
    CHECK(s.alphas[size_t(t)] ==
          doctest::Approx(1.0 - double(s.betas[size_t(t)])).epsilon(1e-9));
  }
}

TEST_CASE("alpha_bar is the running product and decreases strictly") {
  auto s = make_schedule(50, 1e-3, 5e-2);
  double prod = 1.0;
  for (int t = 0; t < s.T; ++t) {
    prod *= 1.0 - (1e-3 + (5e-2 - 1e-3) * double(t) / 49.0);
    CHECK(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-12));
    if (t > 0) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    CHECK(s.alpha_bar(t) > 0.0);
    CHECK(s.alpha_bar(t) < 1.0);
  }
}

TEST_CASE("schedule construction rejects bad arguments") {
  CHECK_THROWS_AS(make_schedule(1), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(100, 0.0, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(100, -1e-4, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(100, 0.05, 0.02), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(100, 1e-4, 1.0), std::invalid_argument);
  CHECK_NOTHROW(make_schedule(2, 0.01, 0.01));

  auto s = make_schedule(10);
  CHECK_THROWS_AS(s.alpha_bar(-1), std::out_of_range);
  CHECK_THROWS_AS(s.alpha_bar(10), std::out_of_range);
  CHECK_NOTHROW(s.alpha_bar(9));
}

TEST_CASE("q_sample follows the closed form") {
  auto s = make_schedule();
  Rng rng(401);
  Tensor<float> z0({2, 3, 4});
  Tensor<float> eps(z0.shape());
  testutil::fill_random(z0, rng);
  testutil::fill_random(eps, rng);

  for (int t : {0, 1, 500, 999}) {
    auto zt = q_sample(z0, t, eps, s);
    const double ab = s.alpha_bar(t);
    const double c0 = double(float(std::sqrt(ab)));
    const double c1 = double(float(std::sqrt(1.0 - ab)));
    for (int64_t i = 0; i < z0.numel(); ++i)
      CHECK(std::abs(double(zt[i]) - (c0 * z0[i] + c1 * eps[i])) < 1e-6);
  }
}

TEST_CASE("q_sample at t = 0 is a near-identity") {
  auto s = make_schedule();
  Rng rng(402);
  Tensor<float> z0({64});
  Tensor<float> eps({64});
  testutil::fill_random(z0, rng);
  testutil::fill_random(eps, rng);

  auto zt = q_sample(z0, 0, eps, s);
  double max_z0 = 0, max_eps = 0, max_diff = 0;
  for (int64_t i = 0; i < 64; ++i) {
    max_z0 = std::max(max_z0, std::abs(double(z0[i])));
    max_eps = std::max(max_eps, std::abs(double(eps[i])));
    max_diff = std::max(max_diff, std::abs(double(zt[i]) - z0[i]));
  }
  // beta_0 = 1e-4: the noise coefficient is exactly 0.01 and the signal
  // coefficient differs from 1 by ~5e-5
  CHECK(max_diff <= 1e-4 * max_z0 + 0.0101 * max_eps);
}

TEST_CASE("q_sample rejects mismatched noise shape") {
  auto s = make_schedule(10);
  Tensor<float> z0({2, 2}), eps({4});
  CHECK_THROWS_WITH(q_sample(z0, 3, eps, s), doctest::Contains("shape"));
}

TEST_CASE("q_sample moments match the schedule (monte carlo)") {
  auto s = make_schedule();
  const int t = 500;
  const double ab = s.alpha_bar(t);
  Rng rng(403);

  const int64_t draws = 20000;
  Tensor<float> z0({8});
  testutil::fill_random(z0, rng);
  double mean_acc = 0, var_acc = 0;
  Tensor<float> eps({8});
  for (int64_t d = 0; d < draws; ++d) {
    rng.fill_normal(eps.data(), eps.numel(), 0.0f, 1.0f);
    auto zt = q_sample(z0, t, eps, s);
    for (int64_t i = 0; i < 8; ++i) {
      const double dev = zt[i] - std::sqrt(ab) * z0[i];
      mean_acc += dev;
      var_acc += dev * dev;
    }
  }
  const double n = double(draws) * 8;
  const double mean = mean_acc / n;
  const double var = var_acc / n;
  // dev ~ N(0, 1-ab): the mean estimate has sd sqrt((1-ab)/n) ~ 0.0025
  CHECK(std::abs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0 - ab).epsilon(0.03));
}
