#include "etk/pipeline.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace etk {

EditOutcome run_edit(VecRef x0_src, const GaussianMixturePrior& prior,
                     const EditPlan& plan, const Schedule& s,
                     const PcParams& pc_params, const LambdaProfile* profile) {
  validate_plan(plan, s);
  EditOutcome out;

  if (plan.method == Method::kSdedit) {
    const Vec start = sdedit_noise(x0_src, s, plan.T_start, plan.seed);
    ReverseOptions opts;
    const Vec ref = x0_src;
    opts.trace_ref = &ref;
    ReverseResult r = ddpm_reverse(prior, plan, s, nullptr, start, opts);
    out.x0_out = std::move(r.x0);
    out.nfe = r.nfe;
    out.trace = std::move(r.trace);
    out.nfe_parts.generation = out.nfe;
    return out;
  }

  if (plan.method == Method::kDdim || plan.method == Method::kDdimPartial) {
    long nfe_inv = 0;
    const Vec start = ddim_invert(x0_src, prior, plan.cond_src,
                                  plan.guidance_src, s, plan.T_start, &nfe_inv);
    const Vec ref = x0_src;
    ReverseResult r = ddim_reverse(prior, plan, s, start, &ref);
    out.x0_out = std::move(r.x0);
    out.nfe = nfe_inv + r.nfe;
    out.trace = std::move(r.trace);
    out.nfe_parts.inversion = nfe_inv;
    out.nfe_parts.generation = r.nfe;
    return out;
  }

  // Stochastic-trajectory methods: replay, zeta, zeus.
  const bool zeus = plan.method == Method::kZeus;
  const int invert_to =
      zeus && !plan.t_prime_per_step ? std::max(plan.T_start, plan.t_prime)
                                     : plan.T_start;
  long nfe_inv = 0;
  out.traj = ddpm_invert(x0_src, prior, plan.cond_src, plan.guidance_src, s,
                         plan.T_start, plan.seed, &nfe_inv, invert_to);
  out.nfe_parts.inversion = nfe_inv;

  PerturbationHook hook;
  if (zeus) {
    const int lo = plan.t_prime_per_step ? plan.T_end : plan.t_prime;
    const int hi = plan.t_prime_per_step ? plan.T_start : plan.t_prime;
    long nfe_probes = 0;
    out.bundle = extract_pcs(out.traj, prior, plan.cond_src, plan.guidance_src,
                             s, lo, hi, pc_params,
                             plan.mask ? &*plan.mask : nullptr, &nfe_probes);
    out.nfe_parts.probes = nfe_probes;
    if (plan.gamma != 0.0)
      hook = perturbation_hook(*out.bundle, profile, plan, s);
  }

  ReverseOptions opts;
  const Vec ref = x0_src;
  opts.trace_ref = &ref;
  if (hook) opts.hook = &hook;
  ReverseResult r = ddpm_reverse(prior, plan, s, &out.traj, out.traj.x_start,
                                 opts);
  out.x0_out = std::move(r.x0);
  out.trace = std::move(r.trace);
  // The generation pass's count includes the parallel source replay backing
  // masked blending; split it back out for the breakdown.
  const long replay_part =
      plan.mask ? (plan.cond_src.is_conditional() ? 2L : 1L) * plan.T_start
                : 0L;
  out.nfe_parts.source_replay = replay_part;
  out.nfe_parts.generation = r.nfe - replay_part;
  out.nfe = nfe_inv + out.nfe_parts.probes + r.nfe;
  return out;
}

}  // namespace etk
