#pragma once

#include <vector>

#include "etk/rng.hpp"
#include "etk/schedule.hpp"
#include "etk/types.hpp"

namespace etk {

// Conditioning signal for the analytic denoiser: either unconditional or a
// reweighting of the prior's mixture components. The unconditional branch
// always uses the prior's own weights, so both branches share one support.
struct Condition {
  enum class Kind { kUnconditional, kComponentWeights };

  Kind kind = Kind::kUnconditional;
  Vec weights;  // size K when kind == kComponentWeights

  static Condition unconditional() { return Condition{}; }
  // Requires non-negative entries summing to 1 within 1e-12.
  static Condition component_weights(Vec w);

  bool is_conditional() const { return kind == Kind::kComponentWeights; }
  bool operator==(const Condition& o) const;
};

// Mixture of K Gaussians. Each covariance is validated SPD at construction
// and eigendecomposed once, so posterior solves at any noise level reduce to
// rotations: (cov + s^2 I)^-1 = U diag(1 / (d + s^2)) U^T.
class GaussianMixturePrior {
 public:
  GaussianMixturePrior(Vec weights, std::vector<Vec> means,
                       std::vector<Mat> covs);

  int dim() const { return dim_; }
  int components() const { return static_cast<int>(comps_.size()); }
  const Vec& weights() const { return weights_; }
  const Vec& mean(int k) const { return comps_[k].mu; }
  const Mat& cov(int k) const { return comps_[k].cov; }
  const Mat& eigvecs(int k) const { return comps_[k].U; }
  const Vec& eigvals(int k) const { return comps_[k].d; }

  // Draws one sample (component by weight, then its Gaussian).
  Vec sample(rng::Stream& stream) const;

 private:
  struct Component {
    Vec mu;
    Mat cov;
    Mat U;  // eigenvectors, columns
    Vec d;  // eigenvalues, >= 0
  };

  int dim_ = 0;
  Vec weights_;
  std::vector<Component> comps_;
};

// Posterior mean E[x0 | y] for y = x0 + s * noise, x0 ~ prior, via the
// closed-form mixture update with log-domain responsibilities.
Vec posterior_mean(const GaussianMixturePrior& prior, VecRef y, double s);

// As above but with the mixture weights replaced (conditioning).
Vec posterior_mean_weighted(const GaussianMixturePrior& prior, VecRef weights,
                            VecRef y, double s);

// Posterior covariance Cov[x0 | y]; symmetric by construction.
Mat posterior_cov(const GaussianMixturePrior& prior, VecRef y, double s);
Mat posterior_cov_weighted(const GaussianMixturePrior& prior, VecRef weights,
                           VecRef y, double s);

struct EpsPrediction {
  Vec eps_hat;
  Vec x0_hat;
};

// Exact noise prediction at timestep t: rescales x_t to the equivalent
// Gaussian denoising problem, applies the posterior mean, and maps back:
//   eps_hat = (x_t - sqrt(abar_t) * x0_hat) / sqrt(1 - abar_t).
// t = 0 is the exact noiseless limit (x0_hat = x_t, eps_hat = 0).
EpsPrediction eval_eps(const GaussianMixturePrior& prior, const Condition& cond,
                       VecRef x_t, int t, const Schedule& s);

// Equal-weight mixture with isotropic bandwidth^2 covariances around the
// given points (a kernel density estimate usable as a prior).
GaussianMixturePrior empirical_prior(const std::vector<Vec>& points,
                                     double bandwidth);

// eps_uncond + w * (eps_cond - eps_uncond).
Vec cfg_combine(VecRef eps_uncond, VecRef eps_cond, double w);

// Guided denoiser with evaluation accounting: a conditional prediction runs
// the unconditional and conditional branches (two evaluations), matching the
// usual cost model for classifier-free guidance. `nfe` counts raw
// evaluations across all calls.
class GuidedDenoiser {
 public:
  GuidedDenoiser(const GaussianMixturePrior& prior, Condition cond,
                 double guidance, const Schedule& schedule)
      : prior_(prior),
        cond_(std::move(cond)),
        guidance_(guidance),
        schedule_(schedule) {}

  EpsPrediction operator()(VecRef x_t, int t);

  const Condition& condition() const { return cond_; }
  double guidance() const { return guidance_; }
  const Schedule& schedule() const { return schedule_; }
  const GaussianMixturePrior& prior() const { return prior_; }
  long nfe() const { return nfe_; }
  // Evaluations a single call costs (2 when conditional, else 1).
  int cost_per_call() const { return cond_.is_conditional() ? 2 : 1; }

 private:
  const GaussianMixturePrior& prior_;
  Condition cond_;
  double guidance_;
  const Schedule& schedule_;
  long nfe_ = 0;
};

}  // namespace etk
