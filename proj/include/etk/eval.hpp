#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "etk/denoiser.hpp"
#include "etk/pipeline.hpp"
#include "etk/sampler.hpp"
#include "etk/types.hpp"
#include "etk/zeus.hpp"

namespace etk {

// Fixed randomly initialized feature network: per layer an affine map with
// seeded Gaussian weights followed by tanh. Evaluation-only; exists to give
// the perceptual and distributional metrics a nonlinear multi-scale
// embedding that is identical across runs for a given seed.
class FeatureExtractor {
 public:
  FeatureExtractor(std::uint64_t seed, int in_dim, int feature_dim = 8,
                   int n_layers = 4);

  std::vector<Vec> features(VecRef x) const;  // one vector per layer
  Vec concat_features(VecRef x) const;

  int in_dim() const { return in_dim_; }
  int feature_dim() const { return feature_dim_; }
  int n_layers() const { return static_cast<int>(w_.size()); }

 private:
  int in_dim_;
  int feature_dim_;
  std::vector<Mat> w_;
  std::vector<Vec> b_;
};

// Mean over layers of the Euclidean distance between unit-normalized
// per-layer features. Zero iff the feature responses coincide.
double lpaps(VecRef a, VecRef b, const FeatureExtractor& fx);

// Squared Frechet distance between two Gaussians:
//   |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)
// with the matrix square roots taken via symmetric eigendecomposition;
// eigenvalues in [-1e-8, 0) are clamped to 0, more negative ones reject the
// input as non-PSD.
double frechet_gaussian(VecRef mu1, MatRef s1, VecRef mu2, MatRef s2);

// Fits mean and covariance (unbiased, n - 1) to each set's concatenated
// layer features and applies frechet_gaussian. Sets need >= 2 samples;
// rank_warning (optional) is set when a set has fewer than feature dim + 1.
double frechet_distance(const std::vector<Vec>& set_a,
                        const std::vector<Vec>& set_b,
                        const FeatureExtractor& fx,
                        bool* rank_warning = nullptr);

// log of the conditional-to-unconditional likelihood ratio of x under the
// prior smoothed by t0_std^2 I. Bounded above by log(max_k cond_k / w_k).
double adherence(VecRef x, const GaussianMixturePrior& prior,
                 const Condition& cond_tgt, double t0_std);

struct CurvePoint {
  std::string method;
  int T_start = 0;
  std::string t_prime;  // timestep, "per-step", or "-"
  double gamma = 0.0;
  double adherence_mean = 0.0;
  double lpaps_mean = 0.0;
  double fad_source = 0.0;
  double fad_reference = 0.0;
  int n_signals = 0;
  std::uint64_t seed = 0;
};

// Runs every method template at every T_start in the grid over the source
// set (each signal under its own derived sub-seed) and aggregates the
// metrics per grid point. Inputs needing a lambda profile (fixed-t' zeus)
// receive the one passed in.
std::vector<CurvePoint> tradeoff_curve(
    const std::vector<Vec>& sources, const GaussianMixturePrior& prior,
    const std::vector<EditPlan>& method_templates,
    const std::vector<int>& t_start_grid, const Schedule& s,
    const FeatureExtractor& fx, const std::vector<Vec>& reference_set,
    const Condition& adherence_cond, double t0_std,
    const PcParams& pc_params = {}, const LambdaProfile* profile = nullptr);

// Header plus one row per point:
// method,T_start,t_prime,gamma,adherence_mean,lpaps_mean,fad_source,fad_reference,n_signals,seed
std::string curve_csv(const std::vector<CurvePoint>& rows);

const char* method_name(Method m);

}  // namespace etk
