#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "etk/eval.hpp"
#include "etk/prior_io.hpp"
#include "etk/rng.hpp"
#include "helpers.hpp"

using namespace etk;

namespace {

std::vector<Vec> prior_draws(const GaussianMixturePrior& prior, int n,
                             const char* stream_name, std::uint64_t seed) {
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    rng::Stream stream(seed, stream_name, static_cast<std::uint64_t>(i));
    out.push_back(prior.sample(stream));
  }
  return out;
}

}  // namespace

TEST_CASE("feature extractor is a fixed seeded network") {
  const FeatureExtractor fx(17, 8, 8, 4);
  CHECK(fx.in_dim() == 8);
  CHECK(fx.feature_dim() == 8);
  CHECK(fx.n_layers() == 4);

  rng::Stream stream(5, "test-eval");
  const Vec x = stream.normal_vec(8);
  const auto layers = fx.features(x);
  REQUIRE(layers.size() == 4);
  for (const auto& f : layers) {
    CHECK(f.size() == 8);
    CHECK(f.cwiseAbs().maxCoeff() < 1.0);
  }
  const Vec cat = fx.concat_features(x);
  REQUIRE(cat.size() == 32);
  for (int l = 0; l < 4; ++l)
    CHECK(test::bitwise_equal(Vec(cat.segment(8 * l, 8)), layers[l]));

  const FeatureExtractor same(17, 8, 8, 4);
  CHECK(test::bitwise_equal(same.concat_features(x), cat));
  const FeatureExtractor other(18, 8, 8, 4);
  CHECK_FALSE(test::bitwise_equal(other.concat_features(x), cat));

  CHECK_THROWS_AS((void)fx.features(Vec(Vec::Zero(5))), std::invalid_argument);
  CHECK_THROWS_AS(FeatureExtractor(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(FeatureExtractor(1, 8, 8, 0), std::invalid_argument);
}

TEST_CASE("perceptual distance behaves like a metric near zero") {
  const FeatureExtractor fx(17, 8);
  rng::Stream stream(9, "test-eval");
  const Vec a = stream.normal_vec(8);
  const Vec b = stream.normal_vec(8);

  CHECK(lpaps(a, a, fx) == 0.0);
  CHECK(lpaps(a, b, fx) == lpaps(b, a, fx));
  CHECK(lpaps(a, b, fx) > 0.0);

  SUBCASE("grows with displacement along random lines") {
    for (int trial = 0; trial < 20; ++trial) {
      rng::Stream line(100 + static_cast<std::uint64_t>(trial), "test-eval");
      const Vec x = line.normal_vec(8);
      const Vec dir = line.normal_vec(8).normalized();
      const double near = lpaps(x, Vec(x + 1e-3 * dir), fx);
      const double far = lpaps(x, Vec(x + 2e-3 * dir), fx);
      CHECK(far > near);
    }
  }
}

TEST_CASE("closed-form distribution distance") {
  Vec mu = Vec::Zero(2);

  SUBCASE("identical Gaussians are at distance zero") {
    const Mat s = test::random_spd(4, 3);
    CHECK(frechet_gaussian(Vec(Vec::Zero(4)), s, Vec(Vec::Zero(4)), s) <=
          1e-8);
  }
  SUBCASE("swapped diagonal spectra give the scalar sum") {
    Mat s1 = (Vec(2) << 1.0, 4.0).finished().asDiagonal();
    Mat s2 = (Vec(2) << 4.0, 1.0).finished().asDiagonal();
    // sum_i d1_i + d2_i - 2 sqrt(d1_i d2_i) = (1 + 4 - 4) + (4 + 1 - 4).
    CHECK(frechet_gaussian(mu, s1, mu, s2) ==
          doctest::Approx(2.0).epsilon(1e-8));
  }
  SUBCASE("mean displacement enters as its squared norm") {
    const Mat eye = Mat::Identity(3, 3);
    Vec m1 = Vec::Zero(3);
    Vec m2(3);
    m2 << 1.0, -2.0, 2.0;
    CHECK(frechet_gaussian(m1, eye, m2, eye) ==
          doctest::Approx(9.0).epsilon(1e-10));
  }
  SUBCASE("roundoff-scale negative eigenvalues clamp to zero") {
    Mat s = (Vec(2) << -5e-9, 1.0).finished().asDiagonal();
    CHECK(frechet_gaussian(mu, s, mu, Mat(Mat::Identity(2, 2))) >= 0.0);
  }
  SUBCASE("indefinite input is rejected") {
    Mat s = (Vec(2) << -1e-6, 1.0).finished().asDiagonal();
    CHECK_THROWS_AS((void)frechet_gaussian(mu, s, mu, Mat(Mat::Identity(2, 2))),
                    std::invalid_argument);
  }
  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS((void)frechet_gaussian(mu, Mat(Mat::Identity(2, 2)),
                                           Vec(Vec::Zero(3)),
                                           Mat(Mat::Identity(3, 3))),
                    std::invalid_argument);
  }
}

TEST_CASE("set-level distance with moment fitting") {
  const FeatureExtractor fx(17, 8);
  const auto prior = io::builtin_two_component();
  const auto big = prior_draws(prior, 40, "test-set-a", 1);

  bool warn = true;
  CHECK(frechet_distance(big, big, fx, &warn) <= 1e-8);
  CHECK_FALSE(warn);  // 40 >= concat dim 32 + 1

  const auto small = prior_draws(prior, 10, "test-set-b", 2);
  (void)frechet_distance(big, small, fx, &warn);
  CHECK(warn);

  const auto shifted = prior_draws(io::builtin_gaussian(), 40, "test-set-c", 3);
  CHECK(frechet_distance(big, shifted, fx) > 0.0);

  CHECK_THROWS_AS((void)frechet_distance({big[0]}, big, fx),
                  std::invalid_argument);
}

TEST_CASE("condition adherence of a signal") {
  const auto prior = io::builtin_two_component();
  const double t0 = 0.1;

  SUBCASE("condition equal to the prior weights scores exactly zero") {
    Vec w(2);
    w << 0.5, 0.5;
    for (int i = 0; i < 5; ++i) {
      rng::Stream stream(40 + static_cast<std::uint64_t>(i), "test-eval");
      const Vec x = prior.sample(stream);
      CHECK(adherence(x, prior, Condition::component_weights(w), t0) == 0.0);
    }
  }
  SUBCASE("bounded by the largest weight ratio") {
    const Condition cond = test::one_hot(1, 2);
    const double bound = std::log(1.0 / 0.5);
    for (int i = 0; i < 10; ++i) {
      rng::Stream stream(60 + static_cast<std::uint64_t>(i), "test-eval");
      const Vec x = stream.normal_vec(8) * 3.0;
      CHECK(adherence(x, prior, cond, t0) <= bound + 1e-12);
    }
  }
  SUBCASE("orders signals by their component basin") {
    const Vec near0 = prior.mean(0);
    CHECK(adherence(near0, prior, test::one_hot(0, 2), t0) >
          adherence(near0, prior, test::one_hot(1, 2), t0));
  }
  SUBCASE("input validation") {
    const Vec x = Vec::Zero(8);
    CHECK_THROWS_AS((void)adherence(x, prior, Condition::unconditional(), t0),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)adherence(x, prior, test::one_hot(0, 3), t0),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)adherence(x, prior, test::one_hot(0, 2), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        (void)adherence(Vec(Vec::Zero(4)), prior, test::one_hot(0, 2), t0),
        std::invalid_argument);
  }
}

TEST_CASE("tradeoff grid evaluation") {
  const Schedule s = test::short_schedule();
  const auto prior = io::builtin_two_component();
  const auto sources = prior_draws(prior, 8, "test-curve-src", 4);
  const auto reference = prior_draws(prior, 8, "test-curve-ref", 5);
  const FeatureExtractor fx(17, 8);
  const Condition target = test::one_hot(1, 2);

  EditPlan zeta;
  zeta.method = Method::kZeta;
  zeta.cond_tgt = target;
  zeta.guidance_tgt = 6.0;
  zeta.seed = 123;
  EditPlan sdedit = zeta;
  sdedit.method = Method::kSdedit;

  const std::vector<int> grid = {20, 40};
  const auto rows = tradeoff_curve(sources, prior, {zeta, sdedit}, grid, s, fx,
                                   reference, target, 0.1);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "zeta");
  CHECK(rows[1].method == "zeta");
  CHECK(rows[2].method == "sdedit");
  CHECK(rows[3].method == "sdedit");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].T_start == grid[i % 2]);
    CHECK(rows[i].t_prime == "-");
    CHECK(rows[i].gamma == 0.0);
    CHECK(rows[i].n_signals == 8);
    CHECK(rows[i].seed == 123);
    CHECK(std::isfinite(rows[i].adherence_mean));
    CHECK(std::isfinite(rows[i].lpaps_mean));
    CHECK(rows[i].fad_source >= 0.0);
    CHECK(rows[i].fad_reference >= 0.0);
  }

  SUBCASE("rerun reproduces every row byte for byte") {
    const auto again = tradeoff_curve(sources, prior, {zeta, sdedit}, grid, s,
                                      fx, reference, target, 0.1);
    CHECK(curve_csv(rows) == curve_csv(again));
  }
  SUBCASE("csv schema") {
    const std::string csv = curve_csv(rows);
    CHECK(csv.rfind("method,T_start,t_prime,gamma,adherence_mean,lpaps_mean,"
                    "fad_source,fad_reference,n_signals,seed\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("zeta,20,-,0,") != std::string::npos);
  }
  SUBCASE("input validation") {
    const std::vector<Vec> few(sources.begin(), sources.begin() + 7);
    CHECK_THROWS_AS((void)tradeoff_curve(few, prior, {zeta}, grid, s, fx,
                                         reference, target, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)tradeoff_curve(sources, prior, {}, grid, s, fx,
                                         reference, target, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)tradeoff_curve(sources, prior, {zeta}, {}, s, fx,
                                         reference, target, 0.1),
                    std::invalid_argument);
  }
}
