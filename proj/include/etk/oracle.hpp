#pragma once

#include <cstdint>

#include "etk/denoiser.hpp"
#include "etk/schedule.hpp"
#include "etk/types.hpp"

namespace etk {

struct EigenPairs {
  Vec values;   // descending
  Mat vectors;  // matching columns, orthonormal
};

// Top n_top eigenpairs of the closed-form posterior covariance at x_t,
// computed with a dense symmetric eigensolver. Reference answer for the
// iterative extraction path.
EigenPairs analytic_posterior_eigs(const GaussianMixturePrior& prior,
                                   const Condition& cond, VecRef x_t, int t,
                                   const Schedule& s, int n_top);

// Central-difference Jacobian of x_t -> x0_hat(x_t) under the given
// condition, step h per coordinate. Chain rule: the Jacobian with respect to
// the rescaled observation y = x_t / sqrt(abar_t) is sqrt(abar_t) times this.
Mat jacobian_fd(const GaussianMixturePrior& prior, const Condition& cond,
                VecRef x_t, int t, const Schedule& s, double h);

struct McStats {
  Vec mean;
  Mat cov;
  Vec se_mean;  // delta-method standard errors, entrywise
  Mat se_cov;
  double ess = 0.0;  // effective sample size (sum w)^2 / sum w^2
  bool low_ess = false;
};

// Monte-Carlo estimate of E[x0 | y] and Cov[x0 | y] for y = x0 + s * noise:
// draws x0 from the prior and self-normalizes Gaussian likelihood weights.
// Independent of the closed-form path. low_ess flags ess < 100.
McStats mc_posterior_stats(const GaussianMixturePrior& prior, VecRef y,
                           double s, long n_samples, std::uint64_t seed);

}  // namespace etk
