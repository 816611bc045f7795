#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "etk/denoiser.hpp"
#include "etk/inversion.hpp"
#include "etk/sampler.hpp"
#include "etk/schedule.hpp"
#include "etk/types.hpp"

namespace etk {

struct PcParams {
  int n_pcs = 1;
  int iters = 50;        // subspace-iteration sweeps
  double probe_c = 1e-3; // finite-difference probe amplitude
  double rho = -0.5;     // sign-coherence threshold, must be negative
};

// Top posterior principal components per timestep: orthonormal basis columns
// and eigenvalue estimates, descending, over an inclusive timestep range.
struct PcBundle {
  int t_lo = 0;
  int t_hi = 0;
  int n_pcs = 0;
  std::vector<Mat> basis;   // index t - t_lo; dim x n_pcs
  std::vector<Vec> lambda;  // index t - t_lo; size n_pcs
  PcParams params;
  std::optional<Vec> mask;
  Condition cond;
  double guidance = 1.0;
  std::uint64_t schedule_hash = 0;
  std::uint64_t seed = 0;

  bool covers(int t) const { return t >= t_lo && t <= t_hi; }
  const Mat& basis_at(int t) const;
  const Vec& lambda_at(int t) const;
  int dim() const { return basis.empty() ? 0 : static_cast<int>(basis[0].rows()); }
};

// Per-timestep eigenvalue curves averaged over several signals' bundles.
struct LambdaProfile {
  int t_lo = 0;
  int t_hi = 0;
  Mat lambda;  // n_pcs x (t_hi - t_lo + 1)

  bool covers(int t) const { return t >= t_lo && t <= t_hi; }
  double at(int pc_index, int t) const;  // pc_index 1-based
  int n_pcs() const { return static_cast<int>(lambda.rows()); }
};

// Estimates the top posterior principal components at each timestep in
// [t_lo, t_hi] by probing the denoiser around the trajectory's states:
//   shifted = x_t + C * sqrt(abar_t) * v
//   v   <- (x0_hat(shifted) - x0_hat(x_t)) / C, orthonormalized each sweep
//   lambda_i = ((1 / abar_t - 1) / C) * |x0_hat(shifted_i) - x0_hat(x_t)|
// with lambda taken from the final sweep's probes. The baseline x0_hat(x_t)
// reuses the prediction cached during inversion when the condition matches,
// so extraction costs exactly n_pcs * iters probe evaluations per timestep.
// When a mask is given, probe outputs are zeroed outside it before
// orthonormalization, confining components to the masked region. Columns are
// sign-aligned across consecutive timesteps: a component is negated when its
// dot product with its t + 1 counterpart falls below rho.
PcBundle extract_pcs(const NoiseTrajectory& traj,
                     const GaussianMixturePrior& prior, const Condition& cond,
                     double guidance, const Schedule& s, int t_lo, int t_hi,
                     const PcParams& params, const Vec* mask = nullptr,
                     long* nfe_out = nullptr);

// Entrywise mean of the bundles' eigenvalue curves; all bundles must agree
// on range and component count.
LambdaProfile average_lambda(const std::vector<PcBundle>& bundles);

// Builds the additive reverse-step term
//   gamma * c_t * sum_j coeff_j * sqrt(lambda_{i_j | t}) * v_{i_j}
// for the plan's component selection, active for t in [T_end, T_start].
// Fixed-t' mode reads directions from the bundle at t' and eigenvalues from
// the profile at the current t (required); per-step mode reads both from the
// bundle at t (profile optional, used for eigenvalues when given).
PerturbationHook perturbation_hook(const PcBundle& bundle,
                                   const LambdaProfile* profile,
                                   const EditPlan& plan, const Schedule& s);

// c_t / sqrt(abar_{t-1}): what a shift injected only through the signal
// projection loses relative to the drift-matched injection.
double asymmetric_shift_ratio(const Schedule& s, int t);

// Shannon entropy of a direction's energy distribution over contiguous
// coordinate groups of the given size.
double pc_entropy(VecRef v, int group_size);

}  // namespace etk
