#include "etk/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "etk/rng.hpp"

namespace etk {

void validate_plan(const EditPlan& plan, const Schedule& s) {
  if (plan.T_start < 1 || plan.T_start > s.T)
    throw std::invalid_argument("plan: T_start outside [1, T]");
  if (plan.T_end < 1 || plan.T_end > plan.T_start)
    throw std::invalid_argument("plan: T_end outside [1, T_start]");
  if (!(plan.delta >= 0.0 && plan.delta <= 1.0))
    throw std::invalid_argument("plan: delta outside [0, 1]");
  if (plan.mask) {
    if (plan.method == Method::kSdedit)
      throw std::invalid_argument(
          "plan: masking needs a trajectory; not available for sdedit");
    for (Eigen::Index j = 0; j < plan.mask->size(); ++j)
      if ((*plan.mask)[j] != 0.0 && (*plan.mask)[j] != 1.0)
        throw std::invalid_argument("plan: mask entries must be 0 or 1");
  }
  if (plan.method == Method::kZeus) {
    if (plan.pc_selector.empty())
      throw std::invalid_argument("plan: zeus needs a non-empty pc selection");
    if (!std::isfinite(plan.gamma))
      throw std::invalid_argument("plan: gamma must be finite");
    if (!plan.t_prime_per_step && (plan.t_prime < 1 || plan.t_prime > s.T))
      throw std::invalid_argument("plan: t_prime outside [1, T]");
  }
}

std::pair<const Condition*, double> generation_condition(const EditPlan& plan) {
  switch (plan.method) {
    case Method::kDdpmReplay:
    case Method::kZeus:
      return {&plan.cond_src, plan.guidance_src};
    case Method::kSdedit:
      if (plan.sdedit_source_prompt)
        return {&plan.cond_src, plan.guidance_src};
      return {&plan.cond_tgt, plan.guidance_tgt};
    default:
      return {&plan.cond_tgt, plan.guidance_tgt};
  }
}

Vec masked_blend(VecRef x_next, VecRef x_orig_next, VecRef mask, double delta) {
  if (x_next.size() != x_orig_next.size() || x_next.size() != mask.size())
    throw std::invalid_argument("masked_blend: size mismatch");
  Vec out(x_next.size());
  for (Eigen::Index j = 0; j < x_next.size(); ++j)
    out[j] = mask[j] == 1.0
                 ? x_next[j]
                 : delta * x_orig_next[j] + (1.0 - delta) * x_next[j];
  return out;
}

ReverseResult ddpm_reverse(const GaussianMixturePrior& prior,
                           const EditPlan& plan, const Schedule& s,
                           const NoiseTrajectory* traj, VecRef start,
                           const ReverseOptions& opts) {
  validate_plan(plan, s);
  if (start.size() != prior.dim())
    throw std::invalid_argument("ddpm_reverse: start dimension mismatch");
  if (traj) {
    if (traj->schedule_hash != s.hash())
      throw std::invalid_argument(
          "ddpm_reverse: trajectory was inverted under a different schedule");
    if (traj->T_start != plan.T_start)
      throw std::invalid_argument("ddpm_reverse: trajectory T_start mismatch");
  }
  if (plan.mask && plan.mask->size() != prior.dim())
    throw std::invalid_argument("ddpm_reverse: mask dimension mismatch");

  ReverseResult parallel;
  const std::vector<Vec>* source_states = opts.source_states;
  long nfe_carry = 0;
  if (plan.mask && !source_states) {
    if (!traj)
      throw std::invalid_argument(
          "ddpm_reverse: masked run needs a trajectory or source states");
    EditPlan replay = plan;
    replay.method = Method::kDdpmReplay;
    replay.mask.reset();
    ReverseOptions replay_opts;
    replay_opts.record_states = true;
    parallel = ddpm_reverse(prior, replay, s, traj, traj->x_start, replay_opts);
    source_states = &parallel.states;
    nfe_carry = parallel.nfe;
  }

  const auto [cond, guidance] = generation_condition(plan);
  GuidedDenoiser den(prior, *cond, guidance, s);

  ReverseResult out;
  out.trace.reserve(plan.T_start);
  if (opts.record_states) out.states.reserve(plan.T_start);

  Vec x = start;
  for (int t = plan.T_start; t >= 1; --t) {
    const EpsPrediction pred = den(x, t);
    Vec x_next = reverse_step_mean(s, t, pred);
    if (opts.hook && *opts.hook) {
      const Vec shift = (*opts.hook)(t);
      if (shift.size() != 0) {
        if (shift.size() != x_next.size())
          throw std::invalid_argument("ddpm_reverse: hook dimension mismatch");
        x_next += shift;
      }
    }
    if (traj) {
      if (t == 1) {
        x_next += traj->residual;
      } else {
        const Vec& slot = traj->z[static_cast<std::size_t>(traj->T_start - t)];
        if (s.sigma[t] > 0.0)
          x_next += s.sigma[t] * slot;
        else
          x_next += slot;
      }
    } else if (s.sigma[t] > 0.0) {
      rng::Stream stream(plan.seed, "generate", static_cast<std::uint64_t>(t));
      x_next += s.sigma[t] * stream.normal_vec(x.size());
    }
    if (source_states)
      x_next = masked_blend(
          x_next, source_states->at(static_cast<std::size_t>(plan.T_start - t)),
          *plan.mask, plan.delta);
    if (!x_next.allFinite())
      throw std::runtime_error("ddpm_reverse: non-finite state at t = " +
                               std::to_string(t));
    out.trace.push_back(StepRecord{
        t, x_next.norm(),
        opts.trace_ref ? (pred.x0_hat - *opts.trace_ref).norm() : 0.0,
        nfe_carry + den.nfe()});
    if (opts.record_states) out.states.push_back(x_next);
    x = std::move(x_next);
  }
  out.x0 = std::move(x);
  out.nfe = nfe_carry + den.nfe();
  return out;
}

ReverseResult ddim_reverse(const GaussianMixturePrior& prior,
                           const EditPlan& plan, const Schedule& s,
                           VecRef start, const Vec* trace_ref) {
  validate_plan(plan, s);
  if (start.size() != prior.dim())
    throw std::invalid_argument("ddim_reverse: start dimension mismatch");
  const auto [cond, guidance] = generation_condition(plan);
  GuidedDenoiser den(prior, *cond, guidance, s);

  ReverseResult out;
  Vec x = start;
  for (int t = plan.T_start; t >= 1; --t) {
    const EpsPrediction pred = den(x, t);
    Vec x_next = std::sqrt(s.alpha_bar[t - 1]) * pred.x0_hat +
                 std::sqrt(1.0 - s.alpha_bar[t - 1]) * pred.eps_hat;
    if (!x_next.allFinite())
      throw std::runtime_error("ddim_reverse: non-finite state at t = " +
                               std::to_string(t));
    out.trace.push_back(StepRecord{
        t, x_next.norm(),
        trace_ref ? (pred.x0_hat - *trace_ref).norm() : 0.0, den.nfe()});
    x = std::move(x_next);
  }
  out.x0 = std::move(x);
  out.nfe = den.nfe();
  return out;
}

NfeBreakdown predict_nfe_breakdown(const EditPlan& plan, int iters,
                                   int n_pcs) {
  const long m_src = plan.cond_src.is_conditional() ? 2 : 1;
  const auto [gen_cond, gen_w] = generation_condition(plan);
  (void)gen_w;
  const long m_gen = gen_cond->is_conditional() ? 2 : 1;
  const long T_start = plan.T_start;

  NfeBreakdown b;
  switch (plan.method) {
    case Method::kSdedit:
      b.generation = m_gen * T_start;
      break;
    case Method::kDdpmReplay:
    case Method::kZeta:
    case Method::kDdim:
    case Method::kDdimPartial:
      b.inversion = m_src * T_start;
      b.generation = m_gen * T_start;
      break;
    case Method::kZeus: {
      const long range = plan.t_prime_per_step
                             ? (T_start - plan.T_end + 1)
                             : 1;
      const long depth = plan.t_prime_per_step
                             ? T_start
                             : std::max<long>(T_start, plan.t_prime);
      b.inversion = m_src * depth;
      b.probes = m_src * static_cast<long>(n_pcs) * iters * range;
      b.generation = m_src * T_start;
      break;
    }
  }
  if (plan.mask && plan.method != Method::kSdedit)
    b.source_replay = m_src * T_start;
  return b;
}

long predict_nfe(const EditPlan& plan, int iters, int n_pcs) {
  return predict_nfe_breakdown(plan, iters, n_pcs).total();
}

}  // namespace etk
