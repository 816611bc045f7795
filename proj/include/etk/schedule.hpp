#pragma once

#include <cstdint>

#include "etk/types.hpp"

namespace etk {

// Variance schedule for a T-step diffusion with linearly spaced betas and
// a stochasticity knob eta (eta = 1: ancestral DDPM noise level, eta = 0:
// deterministic DDIM). Timesteps are 1-based; index 0 is the clean signal,
// with alpha_bar[0] = 1 by convention (hence sigma[1] = 0).
struct Schedule {
  int T = 0;
  double beta_min = 0.0;
  double beta_max = 0.0;
  double eta = 1.0;
  Vec beta;       // beta[t], t = 1..T; beta[0] unused (0)
  Vec alpha_bar;  // alpha_bar[t] = prod_{s<=t} (1 - beta[s]); alpha_bar[0] = 1
  Vec sigma;      // sigma[t], t = 1..T; sigma[0] unused (0)

  // Stable digest of (T, beta_min, beta_max, eta); stored in artifacts so a
  // replay against a different schedule can be rejected.
  std::uint64_t hash() const;
};

// beta_t linear from beta_min to beta_max, alpha_bar_t cumulative product,
// sigma_t = eta * sqrt((1 - abar_{t-1}) / (1 - abar_t)) * sqrt(1 - abar_t / abar_{t-1}).
Schedule build_schedule(int T, double beta_min, double beta_max, double eta);

// s_t = sqrt((1 - abar_t) / abar_t): noise std of the equivalent Gaussian
// denoising problem at timestep t after rescaling by 1 / sqrt(abar_t).
double equivalent_noise_std(const Schedule& s, int t);

// c_t = sqrt(abar_{t-1}) - sqrt(abar_t) * sqrt(1 - abar_{t-1} - sigma_t^2) / sqrt(1 - abar_t):
// amplitude that an additive posterior-mean shift acquires in one reverse step.
double drift_coefficient(const Schedule& s, int t);

// Bounds-checks 1 <= t <= T.
void require_timestep(const Schedule& s, int t);

}  // namespace etk
