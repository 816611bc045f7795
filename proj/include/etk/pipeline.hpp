#pragma once

#include <optional>

#include "etk/denoiser.hpp"
#include "etk/inversion.hpp"
#include "etk/sampler.hpp"
#include "etk/schedule.hpp"
#include "etk/types.hpp"
#include "etk/zeus.hpp"

namespace etk {

struct EditOutcome {
  Vec x0_out;
  long nfe = 0;            // evaluations across inversion, probes, generation
  NfeBreakdown nfe_parts;
  std::vector<StepRecord> trace;
  NoiseTrajectory traj;    // empty for sdedit
  std::optional<PcBundle> bundle;
};

// Full edit pipeline for one signal: inversion (method-appropriate), optional
// principal-component extraction, then the generation pass. Fixed-t' zeus
// plans need a lambda profile covering [T_end, T_start] (eigenvalue curves
// are averaged over signals offline and are not part of a run's evaluation
// count); per-step plans read eigenvalues from their own bundle.
EditOutcome run_edit(VecRef x0_src, const GaussianMixturePrior& prior,
                     const EditPlan& plan, const Schedule& s,
                     const PcParams& pc_params = {},
                     const LambdaProfile* profile = nullptr);

}  // namespace etk
