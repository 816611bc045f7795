#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "etk/denoiser.hpp"
#include "etk/inversion.hpp"
#include "etk/schedule.hpp"
#include "etk/types.hpp"

namespace etk {

enum class Method {
  kDdpmReplay,   // reproduce the inverted trajectory
  kZeta,         // replay trajectory noise under the target condition
  kSdedit,       // noise once, regenerate with fresh per-step noise
  kDdim,         // deterministic inversion + deterministic reverse, full depth
  kDdimPartial,  // as kDdim but inverted only to T_start < T
  kZeus,         // replay plus principal-component perturbation
};

struct EditPlan {
  Method method = Method::kZeta;
  Condition cond_src;
  Condition cond_tgt;
  double guidance_src = 1.0;
  double guidance_tgt = 1.0;
  int T_start = 0;
  int T_end = 1;
  bool t_prime_per_step = false;
  int t_prime = 0;  // extraction timestep when not per-step
  double gamma = 0.0;
  std::vector<std::pair<int, double>> pc_selector;  // 1-based index, coeff
  std::optional<Vec> mask;  // entries in {0, 1}; 1 = editable region
  double delta = 0.025;     // outside-mask pull toward the source per step
  std::uint64_t seed = 0;
  bool sdedit_source_prompt = false;  // regenerate under cond_src instead
};

void validate_plan(const EditPlan& plan, const Schedule& s);

// Condition driving the generation pass: the target condition for kZeta,
// kDdim, kDdimPartial and (by default) kSdedit; the source condition for
// kDdpmReplay and kZeus, whose reverse pass keeps the inversion's prompt.
std::pair<const Condition*, double> generation_condition(const EditPlan& plan);

// Additive term injected into a reverse step; empty vector means none.
using PerturbationHook = std::function<Vec(int t)>;

struct StepRecord {
  int t = 0;
  double x_norm = 0.0;    // |x_{t-1}| after the step
  double ref_dist = 0.0;  // |x0_hat - reference| when a reference is given
  long nfe = 0;           // evaluations consumed so far
};

struct ReverseResult {
  Vec x0;
  long nfe = 0;
  std::vector<StepRecord> trace;
  std::vector<Vec> states;  // x_{t-1} per step when recorded
};

struct ReverseOptions {
  const PerturbationHook* hook = nullptr;
  bool record_states = false;
  const Vec* trace_ref = nullptr;  // distance reference for the trace
  // Same-timestep source states for masked blending; when absent and a mask
  // is set, a parallel replay of the trajectory produces them (its
  // evaluations are added to nfe).
  const std::vector<Vec>* source_states = nullptr;
};

// One full stochastic reverse pass from x_{T_start} down to x_0:
//   x_{t-1} = mu_t(x_t) + hook(t) + noise_t
// where noise_t replays the trajectory slots when one is given (the t = 1
// residual verbatim) and draws fresh sigma_t * N(0, I) otherwise.
ReverseResult ddpm_reverse(const GaussianMixturePrior& prior,
                           const EditPlan& plan, const Schedule& s,
                           const NoiseTrajectory* traj, VecRef start,
                           const ReverseOptions& opts = {});

// Deterministic reverse pass x_{t-1} = sqrt(abar_{t-1}) * x0_hat +
// sqrt(1 - abar_{t-1}) * eps_hat; schedule sigmas are never read.
ReverseResult ddim_reverse(const GaussianMixturePrior& prior,
                           const EditPlan& plan, const Schedule& s,
                           VecRef start, const Vec* trace_ref = nullptr);

// Inside the mask keeps x_next; outside pulls toward the source state:
// delta * x_orig + (1 - delta) * x_next.
Vec masked_blend(VecRef x_next, VecRef x_orig_next, VecRef mask, double delta);

struct NfeBreakdown {
  long inversion = 0;
  long generation = 0;
  long probes = 0;
  long source_replay = 0;  // parallel replay backing masked blending
  long total() const { return inversion + generation + probes + source_replay; }
};

// Evaluation counts implied by a plan: a conditional pass costs two raw
// evaluations per step (guidance), an unconditional one. iters and n_pcs
// size the probe term for kZeus (iters probes per component and timestep;
// per-step mode multiplies by the covered range, giving
// T_start * (1 + n_pcs * iters) - style generation + probe cost when
// T_end = 1). Pure arithmetic, no validation.
NfeBreakdown predict_nfe_breakdown(const EditPlan& plan, int iters = 0,
                                   int n_pcs = 0);
long predict_nfe(const EditPlan& plan, int iters = 0, int n_pcs = 0);

}  // namespace etk
