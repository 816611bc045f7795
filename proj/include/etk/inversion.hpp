#pragma once

#include <cstdint>
#include <vector>

#include "etk/denoiser.hpp"
#include "etk/schedule.hpp"
#include "etk/types.hpp"

namespace etk {

// mu_t(x_t) = sqrt(abar_{t-1}) * x0_hat + sqrt(1 - abar_{t-1} - sigma_t^2) * eps_hat:
// the deterministic part of one reverse step (signal projection plus
// direction term).
Vec reverse_step_mean(const Schedule& s, int t, const EpsPrediction& pred);

// Noise variables that make the reverse process reproduce a concrete signal.
// Slot semantics for z[T_start - t] (t = T_start..2): when sigma_t > 0 the
// slot holds z_t = (x_{t-1} - mu_t) / sigma_t and a replay adds sigma_t * z_t;
// when sigma_t = 0 the slot holds the raw difference and a replay adds it
// verbatim. residual covers t = 1, where sigma_1 = 0 always.
struct NoiseTrajectory {
  int T_start = 0;
  Vec x_start;             // x_{T_start}
  std::vector<Vec> z;      // length T_start - 1, ordered t = T_start..2
  Vec residual;            // x_0 - mu_1(x_1)
  Condition cond_src;
  double guidance_src = 1.0;
  std::uint64_t schedule_hash = 0;
  std::uint64_t seed = 0;

  // In-memory cache from the inversion pass (not serialized): the noised
  // states x_t for t = 0..aux_top and the denoiser's x0 prediction at each,
  // reusable by principal-component extraction at no extra evaluations.
  int aux_top = 0;
  std::vector<Vec> aux_x;      // index t, 0..aux_top
  std::vector<Vec> aux_x0hat;  // index t, 1..aux_top ([0] empty)

  int dim() const { return static_cast<int>(x_start.size()); }
};

// Constructs x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps_t with an
// independent eps_t per timestep (stream keyed by (seed, t)), then extracts
// the noise variables that reproduce the sequence exactly. invert_to extends
// the evaluated range above T_start (extraction at late timesteps); 0 means
// T_start. nfe_out, when given, receives the denoiser evaluation count.
NoiseTrajectory ddpm_invert(VecRef x0, const GaussianMixturePrior& prior,
                            const Condition& cond_src, double guidance_src,
                            const Schedule& s, int T_start, std::uint64_t seed,
                            long* nfe_out = nullptr, int invert_to = 0);

// Deterministic inversion: from t = 0 (noiseless limit) repeatedly re-noises
// via x_{t+1} = sqrt(abar_{t+1}) * x0_hat + sqrt(1 - abar_{t+1}) * eps_hat.
// Returns x_{T_stop}.
Vec ddim_invert(VecRef x0, const GaussianMixturePrior& prior,
                const Condition& cond, double guidance, const Schedule& s,
                int T_stop, long* nfe_out = nullptr);

// Single forward jump x_{T_start} = sqrt(abar) * x0 + sqrt(1 - abar) * eps
// with one fresh draw (no per-step structure to invert).
Vec sdedit_noise(VecRef x0, const Schedule& s, int T_start,
                 std::uint64_t seed);

}  // namespace etk
