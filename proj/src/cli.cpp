#include "etk/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "etk/denoiser.hpp"
#include "etk/errors.hpp"
#include "etk/etk1.hpp"
#include "etk/eval.hpp"
#include "etk/inversion.hpp"
#include "etk/oracle.hpp"
#include "etk/pipeline.hpp"
#include "etk/prior_io.hpp"
#include "etk/rng.hpp"
#include "etk/sampler.hpp"
#include "etk/zeus.hpp"

namespace etk::cli {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

GaussianMixturePrior load_prior_for(const RunConfig& cfg) {
  if (cfg.prior_spec.empty())
    throw InputError("config: key 'prior' is required for this command");
  return io::load_prior(cfg.prior_spec);
}

Vec load_signal(const RunConfig& cfg, const GaussianMixturePrior& prior) {
  if (cfg.signal_spec.empty())
    throw InputError("config: key 'signal' is required for this command");
  const std::string prefix = "sample:";
  if (cfg.signal_spec.rfind(prefix, 0) == 0) {
    std::uint64_t index;
    try {
      index = std::stoull(cfg.signal_spec.substr(prefix.size()));
    } catch (const std::exception&) {
      throw InputError("config: key 'signal': bad sample index in '" +
                       cfg.signal_spec + "'");
    }
    rng::Stream stream(cfg.seed, "signal", index);
    return prior.sample(stream);
  }
  Vec x = io::read_tensor(cfg.signal_spec);
  if (x.size() != prior.dim())
    throw InputError("signal dimension " + std::to_string(x.size()) +
                     " does not match prior dimension " +
                     std::to_string(prior.dim()));
  return x;
}

EditPlan materialized_plan(const RunConfig& cfg, int dim) {
  EditPlan plan = cfg.plan;
  if (cfg.has_mask) plan.mask = mask_from_ranges(cfg.mask_ranges, dim);
  return plan;
}

void ensure_out_dir(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string trace_csv(const std::vector<StepRecord>& trace) {
  std::string csv = "t,x_norm,ref_dist,nfe\n";
  for (const StepRecord& r : trace) {
    csv += std::to_string(r.t) + "," + fmt(r.x_norm) + "," + fmt(r.ref_dist) +
           "," + std::to_string(r.nfe) + "\n";
  }
  return csv;
}

std::optional<LambdaProfile> load_profile(const RunConfig& cfg) {
  if (cfg.lambda_profile_spec.empty()) return std::nullopt;
  return io::read_profile(cfg.lambda_profile_spec);
}

// Extraction range implied by the plan: the perturbed steps in per-step
// mode, the single probe timestep otherwise.
std::pair<int, int> pc_range(const EditPlan& plan) {
  if (plan.t_prime_per_step) return {plan.T_end, plan.T_start};
  if (plan.t_prime < 1)
    throw InputError("config: plan.t_prime is required (timestep or "
                     "'per-step')");
  return {plan.t_prime, plan.t_prime};
}

}  // namespace

void cmd_invert(const RunConfig& cfg, std::ostream& out) {
  const GaussianMixturePrior prior = load_prior_for(cfg);
  const Vec x0 = load_signal(cfg, prior);
  const Schedule s = cfg.schedule();
  const EditPlan plan = materialized_plan(cfg, prior.dim());

  long nfe_inv = 0;
  const NoiseTrajectory traj =
      ddpm_invert(x0, prior, plan.cond_src, plan.guidance_src, s, plan.T_start,
                  cfg.seed, &nfe_inv);

  EditPlan replay = plan;
  replay.method = Method::kDdpmReplay;
  replay.mask.reset();
  const ReverseResult check = ddpm_reverse(prior, replay, s, &traj, traj.x_start);

  ensure_out_dir(cfg);
  const std::string path = cfg.out_path(cfg.out_trajectory);
  io::write_trajectory(path, traj);

  out << "trajectory: " << path << "\n";
  out << "reconstruction_max_abs_err: "
      << fmt((check.x0 - x0).cwiseAbs().maxCoeff()) << "\n";
  out << "nfe_inversion: " << nfe_inv << "\n";
  out << "nfe_replay: " << check.nfe << "\n";
}

void cmd_edit(const RunConfig& cfg, std::ostream& out) {
  const GaussianMixturePrior prior = load_prior_for(cfg);
  const Vec x0 = load_signal(cfg, prior);
  const Schedule s = cfg.schedule();
  const EditPlan plan = materialized_plan(cfg, prior.dim());
  const std::optional<LambdaProfile> profile = load_profile(cfg);

  const EditOutcome outcome = run_edit(x0, prior, plan, s, cfg.pc,
                                       profile ? &*profile : nullptr);

  ensure_out_dir(cfg);
  const std::string path = cfg.out_path(cfg.out_signal);
  io::write_tensor(path, outcome.x0_out);
  if (!cfg.out_trace.empty())
    write_text(cfg.out_path(cfg.out_trace), trace_csv(outcome.trace));

  out << "edit: " << path << "\n";
  out << "method: " << method_name(plan.method) << "\n";
  out << "distance_to_source: " << fmt((outcome.x0_out - x0).norm()) << "\n";
  out << "nfe: " << outcome.nfe << "\n";
  out << "predicted_nfe: " << predict_nfe(plan, cfg.pc.iters, cfg.pc.n_pcs)
      << "\n";
}

void cmd_pcs(const RunConfig& cfg, std::ostream& out) {
  const GaussianMixturePrior prior = load_prior_for(cfg);
  const Vec x0 = load_signal(cfg, prior);
  const Schedule s = cfg.schedule();
  const EditPlan plan = materialized_plan(cfg, prior.dim());

  const auto [t_lo, t_hi] = pc_range(plan);
  const int T_start = plan.T_start > 0 ? plan.T_start : t_hi;

  long nfe_inv = 0;
  const NoiseTrajectory traj =
      ddpm_invert(x0, prior, plan.cond_src, plan.guidance_src, s, T_start,
                  cfg.seed, &nfe_inv, std::max(T_start, t_hi));

  long nfe_probe = 0;
  const PcBundle bundle = extract_pcs(
      traj, prior, plan.cond_src, plan.guidance_src, s, t_lo, t_hi, cfg.pc,
      plan.mask ? &*plan.mask : nullptr, &nfe_probe);

  ensure_out_dir(cfg);
  const std::string path = cfg.out_path(cfg.out_bundle);
  io::write_bundle(path, bundle);

  out << "bundle: " << path << "\n";
  out << "range: " << t_lo << ".." << t_hi << "\n";
  out << "n_pcs: " << bundle.n_pcs << "\n";
  out << "nfe_inversion: " << nfe_inv << "\n";
  out << "nfe_probes: " << nfe_probe << "\n";
}

void cmd_lambda_avg(const RunConfig& cfg, std::ostream& out) {
  const Schedule s = cfg.schedule();
  std::vector<PcBundle> bundles;

  if (!cfg.lambda_bundles.empty()) {
    for (const std::string& path : cfg.lambda_bundles)
      bundles.push_back(io::read_bundle(path));
  } else {
    if (cfg.lambda_n_signals < 1)
      throw InputError(
          "config: lambda.bundles or lambda.n_signals >= 1 is required");
    const GaussianMixturePrior prior = load_prior_for(cfg);
    const EditPlan plan = materialized_plan(cfg, prior.dim());
    const int t_lo = plan.T_end;
    const int t_hi =
        std::max(plan.T_start, plan.t_prime_per_step ? 0 : plan.t_prime);
    const int T_start = plan.T_start > 0 ? plan.T_start : t_hi;
    for (int i = 0; i < cfg.lambda_n_signals; ++i) {
      const std::uint64_t sub_seed =
          rng::splitmix64(cfg.seed ^ rng::splitmix64(i + 1));
      rng::Stream stream(cfg.seed, "lambda-signal", i);
      const Vec x0 = prior.sample(stream);
      const NoiseTrajectory traj =
          ddpm_invert(x0, prior, plan.cond_src, plan.guidance_src, s, T_start,
                      sub_seed, nullptr, t_hi);
      bundles.push_back(extract_pcs(traj, prior, plan.cond_src,
                                    plan.guidance_src, s, t_lo, t_hi, cfg.pc,
                                    plan.mask ? &*plan.mask : nullptr));
    }
  }

  const LambdaProfile profile = average_lambda(bundles);

  ensure_out_dir(cfg);
  const std::string path = cfg.out_path(cfg.out_profile);
  io::write_profile(path, profile);

  out << "profile: " << path << "\n";
  out << "range: " << profile.t_lo << ".." << profile.t_hi << "\n";
  out << "bundles: " << bundles.size() << "\n";
}

void cmd_curve(const RunConfig& cfg, std::ostream& out) {
  const GaussianMixturePrior prior = load_prior_for(cfg);
  const Schedule s = cfg.schedule();
  const EditPlan base = materialized_plan(cfg, prior.dim());
  const std::optional<LambdaProfile> profile = load_profile(cfg);

  if (cfg.t_start_grid.empty())
    throw InputError("config: key 'curve.t_start_grid' is required");

  std::vector<Vec> sources;
  for (int i = 0; i < cfg.curve_n_signals; ++i) {
    rng::Stream stream(cfg.seed, "signal", i);
    sources.push_back(prior.sample(stream));
  }
  const GaussianMixturePrior reference_prior =
      cfg.reference_prior_spec.empty() ? prior
                                       : io::load_prior(cfg.reference_prior_spec);
  std::vector<Vec> reference;
  for (int i = 0; i < cfg.curve_n_signals; ++i) {
    rng::Stream stream(cfg.seed, "reference", i);
    reference.push_back(reference_prior.sample(stream));
  }

  std::vector<Method> methods = cfg.curve_methods;
  if (methods.empty()) methods = {Method::kZeta, Method::kSdedit};
  std::vector<EditPlan> templates;
  for (Method m : methods) {
    EditPlan plan = base;
    plan.method = m;
    templates.push_back(plan);
  }

  const FeatureExtractor fx(cfg.feature_seed, prior.dim(), cfg.feature_dim,
                            cfg.feature_layers);
  const std::vector<CurvePoint> rows = tradeoff_curve(
      sources, prior, templates, cfg.t_start_grid, s, fx, reference,
      base.cond_tgt, cfg.t0_std, cfg.pc, profile ? &*profile : nullptr);

  ensure_out_dir(cfg);
  const std::string path = cfg.out_path(cfg.out_curve);
  write_text(path, curve_csv(rows));

  out << "curve: " << path << "\n";
  out << "rows: " << rows.size() << "\n";
}

void cmd_nfe(const RunConfig& cfg, std::ostream& out) {
  const NfeBreakdown parts =
      predict_nfe_breakdown(cfg.plan, cfg.pc.iters, cfg.pc.n_pcs);
  out << "inversion: " << parts.inversion << "\n";
  out << "generation: " << parts.generation << "\n";
  out << "probes: " << parts.probes << "\n";
  out << "source_replay: " << parts.source_replay << "\n";
  out << "total: " << parts.total() << "\n";
}

namespace {

struct CheckTable {
  std::ostream& out;
  bool all_ok = true;

  void row(const std::string& name, bool ok, double measure,
           const std::string& what) {
    out << (ok ? "[ ok ] " : "[FAIL] ") << name;
    for (std::size_t i = name.size(); i < 28; ++i) out << ' ';
    out << what << " = " << fmt(measure) << "\n";
    all_ok = all_ok && ok;
  }
};

}  // namespace

bool cmd_verify(const RunConfig& cfg, std::ostream& out) {
  const GaussianMixturePrior prior =
      io::load_prior(cfg.prior_spec.empty() ? "builtin:gaussian"
                                            : cfg.prior_spec);
  const Schedule s = cfg.schedule();
  const Condition uncond = Condition::unconditional();
  CheckTable table{out};

  // sigma_t, c_t and the shift ratio against direct recomputation.
  double dev_sched = 0.0, dev_ratio = 0.0;
  for (int t = 1; t <= s.T; ++t) {
    const double ab = s.alpha_bar[t], abp = s.alpha_bar[t - 1];
    const double sigma_ref = s.eta * std::sqrt((1.0 - abp) / (1.0 - ab)) *
                             std::sqrt(1.0 - ab / abp);
    const double c_ref = std::sqrt(abp) -
                         std::sqrt(ab) *
                             std::sqrt(1.0 - abp - sigma_ref * sigma_ref) /
                             std::sqrt(1.0 - ab);
    dev_sched = std::max(dev_sched, std::abs(s.sigma[t] - sigma_ref));
    dev_sched = std::max(dev_sched, std::abs(drift_coefficient(s, t) - c_ref));
    dev_ratio = std::max(dev_ratio, std::abs(asymmetric_shift_ratio(s, t) -
                                             c_ref / std::sqrt(abp)));
  }
  table.row("schedule-reference", dev_sched <= 1e-12, dev_sched, "max dev");
  table.row("shift-ratio", dev_ratio <= 1e-12, dev_ratio, "max dev");

  rng::Stream stream(cfg.seed, "verify");
  const Vec x0 = prior.sample(stream);
  const std::vector<int> ts = {1, s.T / 2, s.T};

  // Covariance equals the rescaled-observation Jacobian times s_t^2, and the
  // analytic eigendecomposition reassembles the covariance.
  double dev_cov = 0.0, dev_sym = 0.0, dev_eig = 0.0;
  for (int t : ts) {
    const double ab = s.alpha_bar[t];
    const Vec x_t = std::sqrt(ab) * x0 +
                    std::sqrt(1.0 - ab) * stream.normal_vec(prior.dim());
    const Mat j_y =
        std::sqrt(ab) * jacobian_fd(prior, uncond, x_t, t, s, 1e-5);
    const Mat lhs = ((1.0 - ab) / ab) * j_y;
    const Mat rhs = posterior_cov(prior, Vec(x_t / std::sqrt(ab)),
                                  equivalent_noise_std(s, t));
    for (int r = 0; r < lhs.rows(); ++r)
      for (int c = 0; c < lhs.cols(); ++c)
        dev_cov = std::max(dev_cov, std::abs(lhs(r, c) - rhs(r, c)) /
                                        std::max(std::abs(rhs(r, c)), 1e-6));
    dev_sym = std::max(dev_sym, (j_y - j_y.transpose()).cwiseAbs().maxCoeff() /
                                    std::max(j_y.cwiseAbs().maxCoeff(), 1e-12));
    const EigenPairs eig =
        analytic_posterior_eigs(prior, uncond, x_t, t, s, prior.dim());
    const Mat rebuilt =
        eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
    dev_eig = std::max(dev_eig, (rebuilt - rhs).cwiseAbs().maxCoeff() /
                                    (1.0 + rhs.norm()));
  }
  table.row("cov-jacobian-identity", dev_cov <= 1e-3, dev_cov, "max rel err");
  table.row("jacobian-symmetry", dev_sym <= 1e-4, dev_sym, "max rel dev");
  table.row("eig-reconstruction", dev_eig <= 1e-8, dev_eig, "max rel dev");

  // Perturbing mu directly vs. shifting (x0_hat, eps_hat) consistently.
  double dev_route = 0.0;
  const double amp = 0.3;
  for (int t = 1; t <= s.T; ++t) {
    const double ab = s.alpha_bar[t];
    const Vec x_t = std::sqrt(ab) * x0 +
                    std::sqrt(1.0 - ab) * stream.normal_vec(prior.dim());
    Vec v = stream.normal_vec(prior.dim());
    v.normalize();
    const EpsPrediction pred = eval_eps(prior, uncond, x_t, t, s);
    const Vec direct = reverse_step_mean(s, t, pred) +
                       drift_coefficient(s, t) * amp * v;
    EpsPrediction shifted;
    shifted.x0_hat = pred.x0_hat + amp * v;
    shifted.eps_hat =
        pred.eps_hat - (std::sqrt(ab) / std::sqrt(1.0 - ab)) * amp * v;
    dev_route = std::max(
        dev_route,
        (reverse_step_mean(s, t, shifted) - direct).cwiseAbs().maxCoeff());
  }
  table.row("perturbation-routes", dev_route <= 1e-10, dev_route, "max dev");

  // Importance-sampling posterior moments against the closed form.
  const double s_mc = 2.0;
  const Vec y = x0 + s_mc * stream.normal_vec(prior.dim());
  const McStats mc = mc_posterior_stats(prior, y, s_mc, 200000, cfg.seed);
  const Vec exact = posterior_mean(prior, y, s_mc);
  double dev_mc = 0.0;
  for (int i = 0; i < prior.dim(); ++i)
    dev_mc = std::max(dev_mc, std::abs(mc.mean[i] - exact[i]) /
                                  std::max(mc.se_mean[i], 1e-300));
  table.row("mc-posterior-mean", dev_mc <= 4.0 && !mc.low_ess, dev_mc,
            "max |err|/se");

  out << (table.all_ok ? "verify: all checks passed\n"
                       : "verify: FAILED\n");
  return table.all_ok;
}

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"analytic-denoiser editing toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<int> n_pcs, iters;
  std::optional<double> probe_c, rho, gamma;
  std::optional<std::string> t_prime, pc_sel;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "run config file")->required();
    sub->add_option("--n-pcs", n_pcs, "components to extract");
    sub->add_option("--iters", iters, "subspace-iteration sweeps");
    sub->add_option("--probe-c", probe_c, "probe amplitude");
    sub->add_option("--rho", rho, "sign-coherence threshold");
    sub->add_option("--t-prime", t_prime, "extraction timestep or 'per-step'");
    sub->add_option("--gamma", gamma, "perturbation strength");
    sub->add_option("--pc", pc_sel, "component selection 'i:coeff,...'");
    return sub;
  };

  enum class Cmd { kInvert, kEdit, kPcs, kLambdaAvg, kVerify, kCurve, kNfe };
  std::vector<std::pair<CLI::App*, Cmd>> subs = {
      {add_common(app.add_subcommand("invert", "extract noise trajectory")),
       Cmd::kInvert},
      {add_common(app.add_subcommand("edit", "run an edit plan")), Cmd::kEdit},
      {add_common(app.add_subcommand("pcs", "extract principal components")),
       Cmd::kPcs},
      {add_common(app.add_subcommand("lambda-avg", "average eigenvalue curves")),
       Cmd::kLambdaAvg},
      {add_common(app.add_subcommand("verify", "run the identity suite")),
       Cmd::kVerify},
      {add_common(app.add_subcommand("curve", "emit trade-off curve CSV")),
       Cmd::kCurve},
      {add_common(app.add_subcommand("nfe", "print predicted evaluation count")),
       Cmd::kNfe},
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (n_pcs) cfg.pc.n_pcs = *n_pcs;
    if (iters) cfg.pc.iters = *iters;
    if (probe_c) cfg.pc.probe_c = *probe_c;
    if (rho) cfg.pc.rho = *rho;
    if (gamma) cfg.plan.gamma = *gamma;
    if (t_prime) {
      if (*t_prime == "per-step") {
        cfg.plan.t_prime_per_step = true;
        cfg.plan.t_prime = 0;
      } else {
        cfg.plan.t_prime_per_step = false;
        try {
          std::size_t pos = 0;
          cfg.plan.t_prime = std::stoi(*t_prime, &pos);
          if (pos != t_prime->size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
          throw InputError("--t-prime expects a timestep or 'per-step'");
        }
      }
    }
    if (pc_sel) cfg.plan.pc_selector = parse_pc_selector(*pc_sel);

    for (const auto& [sub, kind] : subs) {
      if (!sub->parsed()) continue;
      switch (kind) {
        case Cmd::kInvert: cmd_invert(cfg, out); break;
        case Cmd::kEdit: cmd_edit(cfg, out); break;
        case Cmd::kPcs: cmd_pcs(cfg, out); break;
        case Cmd::kLambdaAvg: cmd_lambda_avg(cfg, out); break;
        case Cmd::kVerify:
          if (!cmd_verify(cfg, out)) return 3;
          break;
        case Cmd::kCurve: cmd_curve(cfg, out); break;
        case Cmd::kNfe: cmd_nfe(cfg, out); break;
      }
    }
    return 0;
  } catch (const InputError& e) {
    err << "etk: error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "etk: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "etk: error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace etk::cli
