#include "etk/denoiser.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "etk/rng.hpp"

namespace etk {

namespace {

constexpr double kWeightSumTol = 1e-12;

void check_weights(const Vec& w, const char* what) {
  if (w.size() < 1)
    throw std::invalid_argument(std::string(what) + ": needs >= 1 weight");
  for (Eigen::Index k = 0; k < w.size(); ++k)
    if (!(w[k] >= 0.0))
      throw std::invalid_argument(std::string(what) +
                                  ": weights must be non-negative");
  if (std::abs(w.sum() - 1.0) > kWeightSumTol)
    throw std::invalid_argument(std::string(what) +
                                ": weights must sum to 1 within 1e-12");
}

// Log responsibilities and per-component posterior means at (y, s), shared
// by the mean and covariance paths. log_resp is normalized via the
// max-subtraction trick.
struct PosteriorPieces {
  Vec resp;                // normalized responsibilities
  std::vector<Vec> m;      // per-component posterior means
  std::vector<Vec> gain;   // d / (d + s^2), reused by the covariance
};

PosteriorPieces posterior_pieces(const GaussianMixturePrior& prior,
                                 const Vec& weights, VecRef y, double s) {
  if (y.size() != prior.dim())
    throw std::invalid_argument("posterior: observation dimension mismatch");
  if (!(s > 0.0)) throw std::invalid_argument("posterior: s must be > 0");
  if (weights.size() != prior.components())
    throw std::invalid_argument("posterior: weight count mismatch");

  const int K = prior.components();
  const int n = prior.dim();
  const double s2 = s * s;

  PosteriorPieces p;
  p.m.resize(K);
  p.gain.resize(K);
  Vec log_w(K);

  for (int k = 0; k < K; ++k) {
    const Mat& U = prior.eigvecs(k);
    const Vec& d = prior.eigvals(k);
    const Vec r = y - prior.mean(k);
    const Vec u = U.transpose() * r;
    // log N(y; mu_k, cov_k + s^2 I) up to the shared -n/2 log(2 pi)
    double log_det = 0.0, quad = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = d[i] + s2;
      log_det += std::log(a);
      quad += u[i] * u[i] / a;
    }
    log_w[k] = (weights[k] > 0.0 ? std::log(weights[k])
                                 : -std::numeric_limits<double>::infinity()) -
               0.5 * (log_det + quad);
    p.gain[k] = d.array() / (d.array() + s2);
    p.m[k] = prior.mean(k) + U * p.gain[k].cwiseProduct(u);
  }

  const double m = log_w.maxCoeff();
  p.resp = (log_w.array() - m).exp();
  p.resp /= p.resp.sum();
  return p;
}

}  // namespace

Condition Condition::component_weights(Vec w) {
  check_weights(w, "condition");
  Condition c;
  c.kind = Kind::kComponentWeights;
  c.weights = std::move(w);
  return c;
}

bool Condition::operator==(const Condition& o) const {
  if (kind != o.kind) return false;
  if (kind == Kind::kUnconditional) return true;
  return weights.size() == o.weights.size() && weights == o.weights;
}

GaussianMixturePrior::GaussianMixturePrior(Vec weights, std::vector<Vec> means,
                                           std::vector<Mat> covs) {
  check_weights(weights, "prior");
  const auto K = static_cast<std::size_t>(weights.size());
  if (means.size() != K || covs.size() != K)
    throw std::invalid_argument("prior: weights/means/covs count mismatch");
  dim_ = static_cast<int>(means[0].size());
  if (dim_ < 1) throw std::invalid_argument("prior: dim must be >= 1");

  weights_ = std::move(weights);
  comps_.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (means[k].size() != dim_)
      throw std::invalid_argument("prior: mean dimension mismatch");
    if (covs[k].rows() != dim_ || covs[k].cols() != dim_)
      throw std::invalid_argument("prior: covariance shape mismatch");
    if (!covs[k].isApprox(covs[k].transpose(), 1e-12))
      throw std::invalid_argument("prior: covariance not symmetric");
    Eigen::LLT<Mat> llt(covs[k]);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument(
          "prior: covariance of component " + std::to_string(k) +
          " is not positive definite");
    Eigen::SelfAdjointEigenSolver<Mat> eig(covs[k]);
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("prior: eigendecomposition failed");
    comps_[k].mu = std::move(means[k]);
    comps_[k].cov = std::move(covs[k]);
    comps_[k].U = eig.eigenvectors();
    comps_[k].d = eig.eigenvalues().cwiseMax(0.0);
  }
}

Vec GaussianMixturePrior::sample(rng::Stream& stream) const {
  const double u = stream.uniform();
  int k = 0;
  double acc = 0.0;
  for (; k < components() - 1; ++k) {
    acc += weights_[k];
    if (u < acc) break;
  }
  const auto& c = comps_[k];
  return c.mu + c.U * c.d.cwiseSqrt().cwiseProduct(stream.normal_vec(dim_));
}

Vec posterior_mean_weighted(const GaussianMixturePrior& prior, VecRef weights,
                            VecRef y, double s) {
  const auto p = posterior_pieces(prior, weights, y, s);
  Vec mean = Vec::Zero(prior.dim());
  for (int k = 0; k < prior.components(); ++k) mean += p.resp[k] * p.m[k];
  return mean;
}

Vec posterior_mean(const GaussianMixturePrior& prior, VecRef y, double s) {
  return posterior_mean_weighted(prior, prior.weights(), y, s);
}

Mat posterior_cov_weighted(const GaussianMixturePrior& prior, VecRef weights,
                           VecRef y, double s) {
  const auto p = posterior_pieces(prior, weights, y, s);
  const int n = prior.dim();
  const double s2 = s * s;

  Vec mean = Vec::Zero(n);
  for (int k = 0; k < prior.components(); ++k) mean += p.resp[k] * p.m[k];

  // sum_k resp_k * (C_k + m_k m_k^T) - mean mean^T,
  // C_k = U diag(d s^2 / (d + s^2)) U^T
  Mat cov = Mat::Zero(n, n);
  for (int k = 0; k < prior.components(); ++k) {
    const Mat& U = prior.eigvecs(k);
    const Vec ck = s2 * p.gain[k];
    cov += p.resp[k] * (U * ck.asDiagonal() * U.transpose() +
                        p.m[k] * p.m[k].transpose());
  }
  cov -= mean * mean.transpose();
  return 0.5 * (cov + cov.transpose());
}

Mat posterior_cov(const GaussianMixturePrior& prior, VecRef y, double s) {
  return posterior_cov_weighted(prior, prior.weights(), y, s);
}

EpsPrediction eval_eps(const GaussianMixturePrior& prior, const Condition& cond,
                       VecRef x_t, int t, const Schedule& s) {
  if (cond.is_conditional() && cond.weights.size() != prior.components())
    throw std::invalid_argument("eval_eps: condition weight count mismatch");
  if (t == 0) {
    // Noiseless limit used by the first deterministic-inversion step.
    return EpsPrediction{Vec::Zero(x_t.size()), x_t};
  }
  require_timestep(s, t);
  const double abar = s.alpha_bar[t];
  const double sqrt_abar = std::sqrt(abar);
  const double sqrt_one_minus = std::sqrt(1.0 - abar);
  const Vec y = x_t / sqrt_abar;
  const double noise_std = equivalent_noise_std(s, t);
  const Vec& w = cond.is_conditional() ? cond.weights : prior.weights();
  EpsPrediction out;
  out.x0_hat = posterior_mean_weighted(prior, w, y, noise_std);
  out.eps_hat = (x_t - sqrt_abar * out.x0_hat) / sqrt_one_minus;
  return out;
}

GaussianMixturePrior empirical_prior(const std::vector<Vec>& points,
                                     double bandwidth) {
  if (points.empty())
    throw std::invalid_argument("empirical_prior: needs >= 1 point");
  if (!(bandwidth > 0.0))
    throw std::invalid_argument("empirical_prior: bandwidth must be > 0");
  const auto K = points.size();
  const auto n = points[0].size();
  Vec w = Vec::Constant(static_cast<Eigen::Index>(K),
                        1.0 / static_cast<double>(K));
  std::vector<Mat> covs(K, Mat::Identity(n, n) * (bandwidth * bandwidth));
  return GaussianMixturePrior(std::move(w), points, std::move(covs));
}

Vec cfg_combine(VecRef eps_uncond, VecRef eps_cond, double w) {
  if (eps_uncond.size() != eps_cond.size())
    throw std::invalid_argument("cfg_combine: size mismatch");
  return eps_uncond + w * (eps_cond - eps_uncond);
}

EpsPrediction GuidedDenoiser::operator()(VecRef x_t, int t) {
  if (!cond_.is_conditional()) {
    nfe_ += 1;
    return eval_eps(prior_, cond_, x_t, t, schedule_);
  }
  nfe_ += 2;
  const EpsPrediction uncond =
      eval_eps(prior_, Condition::unconditional(), x_t, t, schedule_);
  const EpsPrediction cond = eval_eps(prior_, cond_, x_t, t, schedule_);
  EpsPrediction out;
  out.eps_hat = cfg_combine(uncond.eps_hat, cond.eps_hat, guidance_);
  if (t == 0) {
    out.x0_hat = x_t;
    return out;
  }
  const double abar = schedule_.alpha_bar[t];
  out.x0_hat = (x_t - std::sqrt(1.0 - abar) * out.eps_hat) / std::sqrt(abar);
  return out;
}

}  // namespace etk
