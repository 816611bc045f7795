#include "etk/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "etk/rng.hpp"

namespace etk {

namespace {

constexpr double kEigClampTol = 1e-8;

// Eigenvalue clamp shared by the square-root steps: roundoff-scale negatives
// go to zero, anything worse is a genuinely indefinite input.
Vec clamped_eigenvalues(const Eigen::SelfAdjointEigenSolver<Mat>& eig,
                        const char* what) {
  Vec d = eig.eigenvalues();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d[i] < -kEigClampTol)
      throw std::invalid_argument(std::string(what) +
                                  ": covariance is not positive semidefinite");
    if (d[i] < 0.0) d[i] = 0.0;
  }
  return d;
}

Vec unit_or_zero(const Vec& v) {
  const double n = v.norm();
  return n > 0.0 ? Vec(v / n) : v;
}

double log_sum_exp(const Vec& terms) {
  const double m = terms.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((terms.array() - m).exp().sum());
}

std::uint64_t signal_sub_seed(std::uint64_t seed, int index) {
  return rng::splitmix64(rng::splitmix64(seed ^ rng::hash_name("curve-signal")) +
                         static_cast<std::uint64_t>(index) * rng::kGolden);
}

}  // namespace

FeatureExtractor::FeatureExtractor(std::uint64_t seed, int in_dim,
                                   int feature_dim, int n_layers)
    : in_dim_(in_dim), feature_dim_(feature_dim) {
  if (in_dim < 1 || feature_dim < 1 || n_layers < 1)
    throw std::invalid_argument("feature extractor: bad shape parameters");
  w_.reserve(static_cast<std::size_t>(n_layers));
  b_.reserve(static_cast<std::size_t>(n_layers));
  for (int l = 0; l < n_layers; ++l) {
    const int fan_in = l == 0 ? in_dim : feature_dim;
    rng::Stream stream(seed, "eval-features", static_cast<std::uint64_t>(l));
    Mat w(feature_dim, fan_in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int r = 0; r < feature_dim; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = scale * stream.normal();
    Vec b(feature_dim);
    for (int r = 0; r < feature_dim; ++r) b[r] = 0.1 * stream.normal();
    w_.push_back(std::move(w));
    b_.push_back(std::move(b));
  }
}

std::vector<Vec> FeatureExtractor::features(VecRef x) const {
  if (x.size() != in_dim_)
    throw std::invalid_argument("feature extractor: input dimension mismatch");
  std::vector<Vec> out;
  out.reserve(w_.size());
  Vec h = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    h = ((w_[l] * h + b_[l]).array().tanh()).matrix();
    out.push_back(h);
  }
  return out;
}

Vec FeatureExtractor::concat_features(VecRef x) const {
  const auto per_layer = features(x);
  Vec out(static_cast<Eigen::Index>(per_layer.size()) * feature_dim_);
  for (std::size_t l = 0; l < per_layer.size(); ++l)
    out.segment(static_cast<Eigen::Index>(l) * feature_dim_, feature_dim_) =
        per_layer[l];
  return out;
}

double lpaps(VecRef a, VecRef b, const FeatureExtractor& fx) {
  const auto fa = fx.features(a);
  const auto fb = fx.features(b);
  double acc = 0.0;
  for (std::size_t l = 0; l < fa.size(); ++l)
    acc += (unit_or_zero(fa[l]) - unit_or_zero(fb[l])).norm();
  return acc / static_cast<double>(fa.size());
}

double frechet_gaussian(VecRef mu1, MatRef s1, VecRef mu2, MatRef s2) {
  if (mu1.size() != mu2.size() || s1.rows() != mu1.size() ||
      s2.rows() != mu2.size() || s1.rows() != s1.cols() ||
      s2.rows() != s2.cols())
    throw std::invalid_argument("frechet_gaussian: shape mismatch");

  Eigen::SelfAdjointEigenSolver<Mat> eig1(s1);
  if (eig1.info() != Eigen::Success)
    throw std::runtime_error("frechet_gaussian: eigensolver failed");
  const Vec d1 = clamped_eigenvalues(eig1, "frechet_gaussian");
  const Mat s1_half = eig1.eigenvectors() * d1.cwiseSqrt().asDiagonal() *
                      eig1.eigenvectors().transpose();

  Mat inner = s1_half * s2 * s1_half;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig2(inner);
  if (eig2.info() != Eigen::Success)
    throw std::runtime_error("frechet_gaussian: eigensolver failed");
  const Vec d2 = clamped_eigenvalues(eig2, "frechet_gaussian");

  const double value = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() -
                       2.0 * d2.cwiseSqrt().sum();
  return std::max(value, 0.0);
}

double frechet_distance(const std::vector<Vec>& set_a,
                        const std::vector<Vec>& set_b,
                        const FeatureExtractor& fx, bool* rank_warning) {
  if (set_a.size() < 2 || set_b.size() < 2)
    throw std::invalid_argument("frechet_distance: each set needs >= 2 samples");
  const Eigen::Index fdim =
      static_cast<Eigen::Index>(fx.n_layers()) * fx.feature_dim();
  if (rank_warning)
    *rank_warning = static_cast<Eigen::Index>(set_a.size()) < fdim + 1 ||
                    static_cast<Eigen::Index>(set_b.size()) < fdim + 1;

  const auto moments = [&](const std::vector<Vec>& set, Vec& mu, Mat& cov) {
    mu = Vec::Zero(fdim);
    std::vector<Vec> feats;
    feats.reserve(set.size());
    for (const auto& x : set) {
      feats.push_back(fx.concat_features(x));
      mu += feats.back();
    }
    mu /= static_cast<double>(set.size());
    cov = Mat::Zero(fdim, fdim);
    for (const auto& f : feats) {
      const Vec r = f - mu;
      cov += r * r.transpose();
    }
    cov /= static_cast<double>(set.size() - 1);
  };

  Vec mu_a, mu_b;
  Mat cov_a, cov_b;
  moments(set_a, mu_a, cov_a);
  moments(set_b, mu_b, cov_b);
  return frechet_gaussian(mu_a, cov_a, mu_b, cov_b);
}

double adherence(VecRef x, const GaussianMixturePrior& prior,
                 const Condition& cond_tgt, double t0_std) {
  if (!cond_tgt.is_conditional())
    throw std::invalid_argument("adherence: needs a component-weight condition");
  if (cond_tgt.weights.size() != prior.components())
    throw std::invalid_argument("adherence: condition weight count mismatch");
  if (!(t0_std > 0.0))
    throw std::invalid_argument("adherence: t0_std must be > 0");
  if (x.size() != prior.dim())
    throw std::invalid_argument("adherence: dimension mismatch");

  const int K = prior.components();
  const double s2 = t0_std * t0_std;
  Vec log_n(K);
  for (int k = 0; k < K; ++k) {
    const Vec u = prior.eigvecs(k).transpose() * (x - prior.mean(k));
    const Vec& d = prior.eigvals(k);
    double log_det = 0.0, quad = 0.0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      log_det += std::log(d[i] + s2);
      quad += u[i] * u[i] / (d[i] + s2);
    }
    log_n[k] = -0.5 * (log_det + quad);
  }
  const auto mixture_log = [&](const Vec& w) {
    Vec terms(K);
    for (int k = 0; k < K; ++k)
      terms[k] = (w[k] > 0.0 ? std::log(w[k])
                             : -std::numeric_limits<double>::infinity()) +
                 log_n[k];
    return log_sum_exp(terms);
  };
  return mixture_log(cond_tgt.weights) - mixture_log(prior.weights());
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kDdpmReplay: return "ddpm-replay";
    case Method::kZeta: return "zeta";
    case Method::kSdedit: return "sdedit";
    case Method::kDdim: return "ddim";
    case Method::kDdimPartial: return "ddim-partial";
    case Method::kZeus: return "zeus";
  }
  return "unknown";
}

std::vector<CurvePoint> tradeoff_curve(
    const std::vector<Vec>& sources, const GaussianMixturePrior& prior,
    const std::vector<EditPlan>& method_templates,
    const std::vector<int>& t_start_grid, const Schedule& s,
    const FeatureExtractor& fx, const std::vector<Vec>& reference_set,
    const Condition& adherence_cond, double t0_std, const PcParams& pc_params,
    const LambdaProfile* profile) {
  if (sources.size() < 8)
    throw std::invalid_argument("tradeoff_curve: needs >= 8 source signals");
  if (t_start_grid.empty() || method_templates.empty())
    throw std::invalid_argument("tradeoff_curve: empty grid or method list");

  std::vector<CurvePoint> rows;
  for (const auto& tmpl : method_templates) {
    for (int t_start : t_start_grid) {
      EditPlan plan = tmpl;
      plan.T_start = t_start;
      plan.T_end = std::min(plan.T_end, t_start);
      if (plan.method == Method::kZeus && !plan.t_prime_per_step)
        plan.t_prime = std::min(plan.t_prime, t_start);

      CurvePoint row;
      row.method = method_name(plan.method);
      row.T_start = t_start;
      row.t_prime = plan.method == Method::kZeus
                        ? (plan.t_prime_per_step ? std::string("per-step")
                                                 : std::to_string(plan.t_prime))
                        : std::string("-");
      row.gamma = plan.method == Method::kZeus ? plan.gamma : 0.0;
      row.n_signals = static_cast<int>(sources.size());
      row.seed = tmpl.seed;

      std::vector<Vec> edited;
      edited.reserve(sources.size());
      double adh = 0.0, lp = 0.0;
      for (std::size_t i = 0; i < sources.size(); ++i) {
        plan.seed = signal_sub_seed(tmpl.seed, static_cast<int>(i));
        const EditOutcome out =
            run_edit(sources[i], prior, plan, s, pc_params, profile);
        adh += adherence(out.x0_out, prior, adherence_cond, t0_std);
        lp += lpaps(out.x0_out, sources[i], fx);
        edited.push_back(out.x0_out);
      }
      row.adherence_mean = adh / static_cast<double>(sources.size());
      row.lpaps_mean = lp / static_cast<double>(sources.size());
      row.fad_source = frechet_distance(edited, sources, fx);
      row.fad_reference = frechet_distance(edited, reference_set, fx);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string curve_csv(const std::vector<CurvePoint>& rows) {
  std::string out =
      "method,T_start,t_prime,gamma,adherence_mean,lpaps_mean,fad_source,"
      "fad_reference,n_signals,seed\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%s,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%llu\n",
                  r.method.c_str(), r.T_start, r.t_prime.c_str(), r.gamma,
                  r.adherence_mean, r.lpaps_mean, r.fad_source,
                  r.fad_reference, r.n_signals,
                  static_cast<unsigned long long>(r.seed));
    out += buf;
  }
  return out;
}

}  // namespace etk
