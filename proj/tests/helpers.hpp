#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etk/denoiser.hpp"
#include "etk/prior_io.hpp"
#include "etk/rng.hpp"
#include "etk/schedule.hpp"
#include "etk/types.hpp"

namespace etk::test {

inline Schedule default_schedule() { return build_schedule(200, 1e-4, 0.02, 1.0); }

// Short schedule for tests that sweep many full reverse passes.
inline Schedule short_schedule(int T = 40) { return build_schedule(T, 1e-4, 0.02, 1.0); }

inline double max_abs_diff(VecRef a, VecRef b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline bool bitwise_equal(VecRef a, VecRef b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

// Single standard Gaussian in the given dimension.
inline GaussianMixturePrior standard_prior(int dim) {
  return GaussianMixturePrior(Vec::Ones(1), {Vec::Zero(dim)},
                              {Mat::Identity(dim, dim)});
}

inline GaussianMixturePrior diag_prior(const Vec& diag) {
  return GaussianMixturePrior(Vec::Ones(1), {Vec::Zero(diag.size())},
                              {Mat(diag.asDiagonal())});
}

// Two equal-weight components at +/- mu with identity covariances.
inline GaussianMixturePrior symmetric_pair(const Vec& mu) {
  Vec w(2);
  w << 0.5, 0.5;
  const int n = static_cast<int>(mu.size());
  return GaussianMixturePrior(w, {mu, Vec(-mu)},
                              {Mat::Identity(n, n), Mat::Identity(n, n)});
}

// Random SPD covariance A A^T + 0.1 I with seeded entries.
inline Mat random_spd(int dim, std::uint64_t seed) {
  rng::Stream stream(seed, "test-spd");
  Mat a(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) a(r, c) = stream.normal();
  return a * a.transpose() / dim + 0.1 * Mat::Identity(dim, dim);
}

inline Condition one_hot(int k, int n) {
  Vec w = Vec::Zero(n);
  w[k] = 1.0;
  return Condition::component_weights(w);
}

}  // namespace etk::test
