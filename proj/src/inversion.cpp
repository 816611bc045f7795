#include "etk/inversion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "etk/rng.hpp"

namespace etk {

Vec reverse_step_mean(const Schedule& s, int t, const EpsPrediction& pred) {
  require_timestep(s, t);
  const double radicand =
      1.0 - s.alpha_bar[t - 1] - s.sigma[t] * s.sigma[t];
  if (radicand < 0.0)
    throw std::domain_error("reverse_step_mean: negative radicand at t = " +
                            std::to_string(t));
  return std::sqrt(s.alpha_bar[t - 1]) * pred.x0_hat +
         std::sqrt(radicand) * pred.eps_hat;
}

NoiseTrajectory ddpm_invert(VecRef x0, const GaussianMixturePrior& prior,
                            const Condition& cond_src, double guidance_src,
                            const Schedule& s, int T_start, std::uint64_t seed,
                            long* nfe_out, int invert_to) {
  require_timestep(s, T_start);
  if (invert_to == 0) invert_to = T_start;
  if (invert_to < T_start || invert_to > s.T)
    throw std::invalid_argument("ddpm_invert: invert_to outside [T_start, T]");
  if (x0.size() != prior.dim())
    throw std::invalid_argument("ddpm_invert: signal dimension mismatch");
  if (!x0.allFinite())
    throw std::invalid_argument("ddpm_invert: signal has non-finite entries");

  const int n = prior.dim();
  const int top = invert_to;

  NoiseTrajectory traj;
  traj.T_start = T_start;
  traj.cond_src = cond_src;
  traj.guidance_src = guidance_src;
  traj.schedule_hash = s.hash();
  traj.seed = seed;
  traj.aux_top = top;
  traj.aux_x.resize(top + 1);
  traj.aux_x0hat.resize(top + 1);
  traj.z.assign(T_start - 1, Vec());

  // x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps_t, eps_t independent per t.
  traj.aux_x[0] = x0;
  for (int t = 1; t <= top; ++t) {
    rng::Stream stream(seed, "inversion", static_cast<std::uint64_t>(t));
    traj.aux_x[t] = std::sqrt(s.alpha_bar[t]) * x0 +
                    std::sqrt(1.0 - s.alpha_bar[t]) * stream.normal_vec(n);
  }
  traj.x_start = traj.aux_x[T_start];

  GuidedDenoiser den(prior, cond_src, guidance_src, s);
  for (int t = top; t >= 1; --t) {
    const EpsPrediction pred = den(traj.aux_x[t], t);
    traj.aux_x0hat[t] = pred.x0_hat;
    const Vec diff = traj.aux_x[t - 1] - reverse_step_mean(s, t, pred);
    if (t == 1) {
      traj.residual = diff;
    } else if (t <= T_start) {
      traj.z[T_start - t] = s.sigma[t] > 0.0 ? Vec(diff / s.sigma[t]) : diff;
      if (!traj.z[T_start - t].allFinite())
        throw std::runtime_error(
            "ddpm_invert: non-finite noise variable at t = " +
            std::to_string(t));
    }
  }
  if (nfe_out) *nfe_out = den.nfe();
  return traj;
}

Vec ddim_invert(VecRef x0, const GaussianMixturePrior& prior,
                const Condition& cond, double guidance, const Schedule& s,
                int T_stop, long* nfe_out) {
  require_timestep(s, T_stop);
  if (x0.size() != prior.dim())
    throw std::invalid_argument("ddim_invert: signal dimension mismatch");

  GuidedDenoiser den(prior, cond, guidance, s);
  Vec x = x0;
  for (int t = 0; t < T_stop; ++t) {
    const EpsPrediction pred = den(x, t);
    x = std::sqrt(s.alpha_bar[t + 1]) * pred.x0_hat +
        std::sqrt(1.0 - s.alpha_bar[t + 1]) * pred.eps_hat;
    if (!x.allFinite())
      throw std::runtime_error("ddim_invert: non-finite state at t = " +
                               std::to_string(t + 1));
  }
  if (nfe_out) *nfe_out = den.nfe();
  return x;
}

Vec sdedit_noise(VecRef x0, const Schedule& s, int T_start,
                 std::uint64_t seed) {
  require_timestep(s, T_start);
  rng::Stream stream(seed, "sdedit-init", static_cast<std::uint64_t>(T_start));
  return std::sqrt(s.alpha_bar[T_start]) * x0 +
         std::sqrt(1.0 - s.alpha_bar[T_start]) * stream.normal_vec(x0.size());
}

}  // namespace etk
