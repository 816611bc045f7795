#include "etk/zeus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "etk/rng.hpp"

namespace etk {

namespace {

void check_params(const PcParams& p, int dim) {
  if (p.n_pcs < 1 || p.n_pcs > dim)
    throw std::invalid_argument("pc params: n_pcs outside [1, dim]");
  if (p.iters < 1) throw std::invalid_argument("pc params: iters must be >= 1");
  if (!(p.probe_c > 0.0))
    throw std::invalid_argument("pc params: probe_c must be > 0");
  if (!(p.rho < 0.0))
    throw std::invalid_argument("pc params: rho must be negative");
}

// Orthonormalizes columns in place with signs fixed so the R diagonal is
// non-negative (canonical Q for reproducibility).
Mat orthonormalize(const Mat& w) {
  const auto n = w.rows();
  const auto k = w.cols();
  Eigen::HouseholderQR<Mat> qr(w);
  Mat q = qr.householderQ() * Mat::Identity(n, k);
  const Mat r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < k; ++i)
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

}  // namespace

const Mat& PcBundle::basis_at(int t) const {
  if (!covers(t))
    throw std::invalid_argument("pc bundle: timestep " + std::to_string(t) +
                                " outside [" + std::to_string(t_lo) + ", " +
                                std::to_string(t_hi) + "]");
  return basis[static_cast<std::size_t>(t - t_lo)];
}

const Vec& PcBundle::lambda_at(int t) const {
  if (!covers(t))
    throw std::invalid_argument("pc bundle: timestep " + std::to_string(t) +
                                " outside [" + std::to_string(t_lo) + ", " +
                                std::to_string(t_hi) + "]");
  return lambda[static_cast<std::size_t>(t - t_lo)];
}

double LambdaProfile::at(int pc_index, int t) const {
  if (!covers(t))
    throw std::invalid_argument("lambda profile: timestep " +
                                std::to_string(t) + " not covered");
  if (pc_index < 1 || pc_index > n_pcs())
    throw std::invalid_argument("lambda profile: component index " +
                                std::to_string(pc_index) + " not covered");
  return lambda(pc_index - 1, t - t_lo);
}

PcBundle extract_pcs(const NoiseTrajectory& traj,
                     const GaussianMixturePrior& prior, const Condition& cond,
                     double guidance, const Schedule& s, int t_lo, int t_hi,
                     const PcParams& params, const Vec* mask, long* nfe_out) {
  const int n = prior.dim();
  check_params(params, n);
  if (t_lo < 1 || t_lo > t_hi)
    throw std::invalid_argument("extract_pcs: bad timestep range");
  if (t_hi > traj.aux_top || traj.aux_x.size() <= static_cast<std::size_t>(t_hi))
    throw std::invalid_argument(
        "extract_pcs: trajectory states do not cover the range");
  if (traj.schedule_hash != s.hash())
    throw std::invalid_argument(
        "extract_pcs: trajectory was inverted under a different schedule");
  if (mask && mask->size() != n)
    throw std::invalid_argument("extract_pcs: mask dimension mismatch");

  const bool baseline_cached =
      cond == traj.cond_src && guidance == traj.guidance_src &&
      !traj.aux_x0hat.empty();
  GuidedDenoiser den(prior, cond, guidance, s);

  PcBundle bundle;
  bundle.t_lo = t_lo;
  bundle.t_hi = t_hi;
  bundle.n_pcs = params.n_pcs;
  bundle.params = params;
  if (mask) bundle.mask = *mask;
  bundle.cond = cond;
  bundle.guidance = guidance;
  bundle.schedule_hash = s.hash();
  bundle.seed = traj.seed;
  const int len = t_hi - t_lo + 1;
  bundle.basis.resize(len);
  bundle.lambda.resize(len);

  for (int t = t_hi; t >= t_lo; --t) {
    const Vec& x_t = traj.aux_x[static_cast<std::size_t>(t)];
    const Vec x0_base =
        baseline_cached ? traj.aux_x0hat[static_cast<std::size_t>(t)]
                        : den(x_t, t).x0_hat;
    const double abar = s.alpha_bar[t];
    const double probe_scale = params.probe_c * std::sqrt(abar);

    Mat v(n, params.n_pcs);
    for (int i = 0; i < params.n_pcs; ++i) {
      rng::Stream stream(traj.seed, "pc-init", static_cast<std::uint64_t>(t),
                         static_cast<std::uint64_t>(i));
      v.col(i) = stream.normal_vec(n);
    }
    v = orthonormalize(v);

    Vec lam = Vec::Zero(params.n_pcs);
    Mat w(n, params.n_pcs);
    for (int sweep = 1; sweep <= params.iters; ++sweep) {
      for (int i = 0; i < params.n_pcs; ++i) {
        Vec dir = v.col(i);
        for (int attempt = 0;; ++attempt) {
          const Vec x0_shift =
              den(x_t + probe_scale * dir, t).x0_hat;
          w.col(i) = (x0_shift - x0_base) / params.probe_c;
          if (mask) w.col(i) = w.col(i).cwiseProduct(*mask);
          if (w.col(i).norm() > 0.0) break;
          if (attempt >= 1)
            throw std::runtime_error(
                "extract_pcs: probe output vanished twice at t = " +
                std::to_string(t) + ", component " + std::to_string(i + 1));
          rng::Stream retry(traj.seed, "pc-reinit",
                            static_cast<std::uint64_t>(t),
                            static_cast<std::uint64_t>(i));
          dir = retry.normal_vec(n).normalized();
        }
      }
      if (sweep == params.iters)
        // lambda_i = ((1 / abar - 1) / C) * |x0_shift - x0| from this sweep's
        // probes; |w_i| already carries the 1 / C factor.
        for (int i = 0; i < params.n_pcs; ++i)
          lam[i] = (1.0 / abar - 1.0) * w.col(i).norm();
      v = orthonormalize(w);
    }

    // Descending eigenvalue order (subspace iteration converges that way;
    // enforce it exactly).
    std::vector<int> order(static_cast<std::size_t>(params.n_pcs));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return lam[a] > lam[b]; });
    Mat v_sorted(n, params.n_pcs);
    Vec lam_sorted(params.n_pcs);
    for (int i = 0; i < params.n_pcs; ++i) {
      v_sorted.col(i) = v.col(order[static_cast<std::size_t>(i)]);
      lam_sorted[i] = lam[order[static_cast<std::size_t>(i)]];
    }

    // Sign coherence against the previously processed timestep t + 1.
    if (t < t_hi) {
      const Mat& prev = bundle.basis[static_cast<std::size_t>(t + 1 - t_lo)];
      for (int i = 0; i < params.n_pcs; ++i)
        if (v_sorted.col(i).dot(prev.col(i)) < params.rho)
          v_sorted.col(i) = -v_sorted.col(i);
    }

    bundle.basis[static_cast<std::size_t>(t - t_lo)] = std::move(v_sorted);
    bundle.lambda[static_cast<std::size_t>(t - t_lo)] = std::move(lam_sorted);
  }
  if (nfe_out) *nfe_out = den.nfe();
  return bundle;
}

LambdaProfile average_lambda(const std::vector<PcBundle>& bundles) {
  if (bundles.empty())
    throw std::invalid_argument("average_lambda: needs >= 1 bundle");
  const auto& first = bundles.front();
  LambdaProfile profile;
  profile.t_lo = first.t_lo;
  profile.t_hi = first.t_hi;
  const int len = first.t_hi - first.t_lo + 1;
  profile.lambda = Mat::Zero(first.n_pcs, len);
  for (const auto& b : bundles) {
    if (b.t_lo != first.t_lo || b.t_hi != first.t_hi ||
        b.n_pcs != first.n_pcs)
      throw std::invalid_argument(
          "average_lambda: bundles disagree on range or component count");
    for (int c = 0; c < len; ++c)
      profile.lambda.col(c) += b.lambda[static_cast<std::size_t>(c)];
  }
  profile.lambda /= static_cast<double>(bundles.size());
  return profile;
}

PerturbationHook perturbation_hook(const PcBundle& bundle,
                                   const LambdaProfile* profile,
                                   const EditPlan& plan, const Schedule& s) {
  if (plan.pc_selector.empty())
    throw std::invalid_argument("perturbation_hook: empty pc selection");
  for (const auto& [idx, coeff] : plan.pc_selector) {
    if (idx < 1 || idx > bundle.n_pcs)
      throw std::invalid_argument("perturbation_hook: component index " +
                                  std::to_string(idx) + " outside [1, " +
                                  std::to_string(bundle.n_pcs) + "]");
    if (!std::isfinite(coeff))
      throw std::invalid_argument("perturbation_hook: non-finite coefficient");
  }
  if (!plan.t_prime_per_step) {
    if (!bundle.covers(plan.t_prime))
      throw std::invalid_argument(
          "perturbation_hook: bundle does not cover t_prime");
    if (!profile)
      throw std::invalid_argument(
          "perturbation_hook: fixed-t' mode needs a lambda profile");
    if (!profile->covers(plan.T_end) || !profile->covers(plan.T_start))
      throw std::invalid_argument(
          "perturbation_hook: lambda profile does not cover [T_end, T_start]");
  } else {
    if (!bundle.covers(plan.T_end) || !bundle.covers(plan.T_start))
      throw std::invalid_argument(
          "perturbation_hook: bundle does not cover [T_end, T_start]");
  }

  const auto selector = plan.pc_selector;
  const double gamma = plan.gamma;
  const int t_lo = plan.T_end;
  const int t_hi = plan.T_start;
  const bool per_step = plan.t_prime_per_step;
  const int t_fixed = plan.t_prime;

  return [&bundle, profile, &s, selector, gamma, t_lo, t_hi, per_step,
          t_fixed](int t) -> Vec {
    if (t < t_lo || t > t_hi) return Vec();
    const double c_t = drift_coefficient(s, t);
    const Mat& basis = per_step ? bundle.basis_at(t) : bundle.basis_at(t_fixed);
    Vec shift = Vec::Zero(basis.rows());
    for (const auto& [idx, coeff] : selector) {
      double lam;
      if (per_step)
        lam = profile ? profile->at(idx, t) : bundle.lambda_at(t)[idx - 1];
      else
        lam = profile->at(idx, t);
      shift += coeff * std::sqrt(std::max(lam, 0.0)) * basis.col(idx - 1);
    }
    return gamma * c_t * shift;
  };
}

double asymmetric_shift_ratio(const Schedule& s, int t) {
  return drift_coefficient(s, t) / std::sqrt(s.alpha_bar[t - 1]);
}

double pc_entropy(VecRef v, int group_size) {
  if (group_size < 1)
    throw std::invalid_argument("pc_entropy: group_size must be >= 1");
  if (v.size() % group_size != 0)
    throw std::invalid_argument(
        "pc_entropy: length not divisible by group_size");
  const double total = v.squaredNorm();
  if (!(total > 0.0))
    throw std::invalid_argument("pc_entropy: zero vector");
  double h = 0.0;
  for (Eigen::Index g = 0; g < v.size(); g += group_size) {
    const double p = v.segment(g, group_size).squaredNorm() / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace etk
