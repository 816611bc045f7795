#include "etk/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "etk/rng.hpp"

namespace etk {

EigenPairs analytic_posterior_eigs(const GaussianMixturePrior& prior,
                                   const Condition& cond, VecRef x_t, int t,
                                   const Schedule& s, int n_top) {
  if (n_top < 1 || n_top > prior.dim())
    throw std::invalid_argument("analytic_posterior_eigs: bad n_top");
  require_timestep(s, t);
  const Vec y = x_t / std::sqrt(s.alpha_bar[t]);
  const Vec& w = cond.is_conditional() ? cond.weights : prior.weights();
  const Mat cov =
      posterior_cov_weighted(prior, w, y, equivalent_noise_std(s, t));
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("analytic_posterior_eigs: eigensolver failed");
  // Eigen returns ascending order; flip to descending.
  const int n = prior.dim();
  EigenPairs out;
  out.values = Vec(n_top);
  out.vectors = Mat(n, n_top);
  for (int i = 0; i < n_top; ++i) {
    out.values[i] = eig.eigenvalues()[n - 1 - i];
    out.vectors.col(i) = eig.eigenvectors().col(n - 1 - i);
  }
  return out;
}

Mat jacobian_fd(const GaussianMixturePrior& prior, const Condition& cond,
                VecRef x_t, int t, const Schedule& s, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("jacobian_fd: h must be > 0");
  require_timestep(s, t);
  const int n = prior.dim();
  Mat J(n, n);
  Vec x = x_t;
  for (int j = 0; j < n; ++j) {
    const double orig = x[j];
    x[j] = orig + h;
    const Vec fp = eval_eps(prior, cond, x, t, s).x0_hat;
    x[j] = orig - h;
    const Vec fm = eval_eps(prior, cond, x, t, s).x0_hat;
    x[j] = orig;
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

McStats mc_posterior_stats(const GaussianMixturePrior& prior, VecRef y,
                           double s, long n_samples, std::uint64_t seed) {
  if (n_samples < 1000)
    throw std::invalid_argument("mc_posterior_stats: n_samples must be >= 1e3");
  if (!(s > 0.0))
    throw std::invalid_argument("mc_posterior_stats: s must be > 0");
  if (y.size() != prior.dim())
    throw std::invalid_argument("mc_posterior_stats: dimension mismatch");

  const int n = prior.dim();
  const double inv_2s2 = 1.0 / (2.0 * s * s);

  // Pass 1: self-normalized mean/covariance. Weights are shifted by the
  // running maximum exponent offline: track raw log-weights' max first.
  // Regenerating the stream keeps memory flat at any n_samples.
  double max_logw = -std::numeric_limits<double>::infinity();
  {
    rng::Stream stream(seed, "mc-oracle");
    for (long j = 0; j < n_samples; ++j) {
      const Vec x = prior.sample(stream);
      max_logw = std::max(max_logw, -(y - x).squaredNorm() * inv_2s2);
    }
  }

  double sum_w = 0.0, sum_w2 = 0.0;
  Vec sum_wx = Vec::Zero(n);
  Mat sum_wxx = Mat::Zero(n, n);
  {
    rng::Stream stream(seed, "mc-oracle");
    for (long j = 0; j < n_samples; ++j) {
      const Vec x = prior.sample(stream);
      const double w = std::exp(-(y - x).squaredNorm() * inv_2s2 - max_logw);
      sum_w += w;
      sum_w2 += w * w;
      sum_wx += w * x;
      sum_wxx += w * (x * x.transpose());
    }
  }
  if (!(sum_w > 0.0))
    throw std::runtime_error("mc_posterior_stats: all weights vanished");

  McStats out;
  out.mean = sum_wx / sum_w;
  out.cov = sum_wxx / sum_w - out.mean * out.mean.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.ess = sum_w * sum_w / sum_w2;
  out.low_ess = out.ess < 100.0;

  // Pass 2: delta-method errors se^2 = sum_j wbar_j^2 (h_j - estimate)^2 for
  // h in {x_i, (x_i - m_i)(x_l - m_l)}.
  Vec se_m = Vec::Zero(n);
  Mat se_c = Mat::Zero(n, n);
  {
    rng::Stream stream(seed, "mc-oracle");
    for (long j = 0; j < n_samples; ++j) {
      const Vec x = prior.sample(stream);
      const double wbar =
          std::exp(-(y - x).squaredNorm() * inv_2s2 - max_logw) / sum_w;
      const Vec r = x - out.mean;
      se_m += (wbar * wbar) * r.cwiseAbs2();
      const Mat hdev = r * r.transpose() - out.cov;
      se_c += (wbar * wbar) * hdev.cwiseAbs2();
    }
  }
  out.se_mean = se_m.cwiseSqrt();
  out.se_cov = se_c.cwiseSqrt();
  return out;
}

}  // namespace etk
