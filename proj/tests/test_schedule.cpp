#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "etk/schedule.hpp"
#include "helpers.hpp"

using namespace etk;

TEST_CASE("default schedule satisfies the boundary conventions") {
  const Schedule s = test::default_schedule();
  CHECK(s.T == 200);
  CHECK(s.alpha_bar[0] == 1.0);
  CHECK(s.sigma[1] == 0.0);
  CHECK(s.alpha_bar[200] < s.alpha_bar[1]);
  for (int t = 1; t <= s.T; ++t) {
    CHECK(s.alpha_bar[t] > 0.0);
    CHECK(s.alpha_bar[t] < 1.0);
    CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
    CHECK(s.sigma[t] >= 0.0);
    CHECK(s.beta[t] > 0.0);
    CHECK(s.beta[t] < 1.0);
  }
  // Linear interpolation of beta between the endpoints.
  CHECK(s.beta[1] == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(s.beta[200] == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(s.beta[100] < s.beta[101]);
}

TEST_CASE("eta zero removes all reverse-step noise") {
  const Schedule s = build_schedule(2, 0.5, 0.5, 0.0);
  CHECK(s.sigma[1] == 0.0);
  CHECK(s.sigma[2] == 0.0);
}

TEST_CASE("sigma sequence matches its closed form") {
  const Schedule s = test::default_schedule();
  double dev = 0.0;
  for (int t = 1; t <= s.T; ++t) {
    const double ab = s.alpha_bar[t], abp = s.alpha_bar[t - 1];
    const double ref = s.eta * std::sqrt((1.0 - abp) / (1.0 - ab)) *
                       std::sqrt(1.0 - ab / abp);
    dev = std::max(dev, std::abs(s.sigma[t] - ref));
  }
  CHECK(dev <= 1e-12);
}

TEST_CASE("eta one reproduces the posterior noise level sqrt(beta_tilde)") {
  // sigma_t^2 = (1 - abar_{t-1}) / (1 - abar_t) * beta_t when eta = 1.
  const Schedule s = test::default_schedule();
  for (int t = 2; t <= s.T; t += 7) {
    const double beta_tilde =
        (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t];
    CHECK(s.sigma[t] * s.sigma[t] ==
          doctest::Approx(beta_tilde).epsilon(1e-12));
  }
}

TEST_CASE("equivalent noise level") {
  const Schedule s = test::default_schedule();
  SUBCASE("abar one half gives unit noise") {
    // Direct formula check at the first t where abar drops below 0.5.
    for (int t = 1; t <= s.T; ++t) {
      const double ref = std::sqrt((1.0 - s.alpha_bar[t]) / s.alpha_bar[t]);
      CHECK(equivalent_noise_std(s, t) == doctest::Approx(ref).epsilon(1e-14));
    }
    Schedule half = s;
    half.alpha_bar[100] = 0.5;
    CHECK(equivalent_noise_std(half, 100) == 1.0);
  }
  SUBCASE("timestep bounds enforced") {
    CHECK_THROWS_AS((void)equivalent_noise_std(s, 0), std::invalid_argument);
    CHECK_THROWS_AS((void)equivalent_noise_std(s, s.T + 1),
                    std::invalid_argument);
  }
}

TEST_CASE("drift coefficient") {
  const Schedule s = test::default_schedule();
  SUBCASE("matches the closed form at t = 150") {
    const int t = 150;
    const double ab = s.alpha_bar[t], abp = s.alpha_bar[t - 1];
    const double ref = std::sqrt(abp) -
                       std::sqrt(ab) *
                           std::sqrt(1.0 - abp - s.sigma[t] * s.sigma[t]) /
                           std::sqrt(1.0 - ab);
    CHECK(std::abs(drift_coefficient(s, t) - ref) <= 1e-12);
  }
  SUBCASE("direction term vanishing leaves sqrt(abar_prev)") {
    Schedule tweaked = s;
    double sig = std::sqrt(1.0 - s.alpha_bar[49]);
    while (sig * sig > 1.0 - s.alpha_bar[49]) sig = std::nextafter(sig, 0.0);
    tweaked.sigma[50] = sig;
    CHECK(drift_coefficient(tweaked, 50) ==
          doctest::Approx(std::sqrt(s.alpha_bar[49])).epsilon(1e-7));
  }
  SUBCASE("equal neighboring abar with zero sigma cancels to rounding") {
    Schedule degenerate = s;
    degenerate.sigma[50] = 0.0;
    degenerate.alpha_bar[49] = degenerate.alpha_bar[50];
    CHECK(std::abs(drift_coefficient(degenerate, 50)) <= 1e-15);
  }
  SUBCASE("sigma too large for the radicand is a numeric error") {
    Schedule broken = s;
    broken.sigma[50] = std::sqrt(1.0 - s.alpha_bar[49]) + 0.1;
    CHECK_THROWS_AS((void)drift_coefficient(broken, 50), std::domain_error);
  }
  SUBCASE("first step has unit drift coefficient") {
    // abar_0 = 1 and sigma_1 = 0 zero the direction radicand, so c_1 = 1.
    CHECK(drift_coefficient(s, 1) == 1.0);
  }
}

TEST_CASE("construction rejects out-of-range parameters") {
  CHECK_THROWS_AS((void)build_schedule(1, 1e-4, 0.02, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)build_schedule(200, 0.0, 0.02, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)build_schedule(200, 1e-4, 1.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)build_schedule(200, 0.03, 0.02, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)build_schedule(200, 1e-4, 0.02, 1.5),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)build_schedule(200, 1e-4, 0.02, -0.1),
                  std::invalid_argument);
}

TEST_CASE("rebuilding with equal parameters is bit-identical") {
  const Schedule a = build_schedule(123, 2e-4, 0.015, 0.7);
  const Schedule b = build_schedule(123, 2e-4, 0.015, 0.7);
  CHECK(test::bitwise_equal(a.beta, b.beta));
  CHECK(test::bitwise_equal(a.alpha_bar, b.alpha_bar));
  CHECK(test::bitwise_equal(a.sigma, b.sigma));
  CHECK(a.hash() == b.hash());
}

TEST_CASE("hash separates every parameter") {
  const Schedule base = build_schedule(200, 1e-4, 0.02, 1.0);
  CHECK(base.hash() != build_schedule(201, 1e-4, 0.02, 1.0).hash());
  CHECK(base.hash() != build_schedule(200, 2e-4, 0.02, 1.0).hash());
  CHECK(base.hash() != build_schedule(200, 1e-4, 0.021, 1.0).hash());
  CHECK(base.hash() != build_schedule(200, 1e-4, 0.02, 0.5).hash());
}
