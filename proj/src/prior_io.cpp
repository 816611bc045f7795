#include "etk/prior_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "etk/errors.hpp"
#include "etk/rng.hpp"

namespace etk::io {

namespace {

// Whitespace tokens with '#'-to-end-of-line comments removed.
std::vector<std::string> tokenize(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
  }
  return tokens;
}

class TokenReader {
 public:
  explicit TokenReader(std::vector<std::string> tokens)
      : tokens_(std::move(tokens)) {}

  std::string word() {
    if (pos_ >= tokens_.size()) throw InputError("prior: unexpected end of file");
    return tokens_[pos_++];
  }
  void expect(const std::string& kw) {
    const std::string w = word();
    if (w != kw)
      throw InputError("prior: expected '" + kw + "', found '" + w + "'");
  }
  double number() {
    const std::string w = word();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(w, &used);
    } catch (const std::exception&) {
      throw InputError("prior: not a number: '" + w + "'");
    }
    if (used != w.size()) throw InputError("prior: not a number: '" + w + "'");
    return v;
  }
  long integer() {
    const double v = number();
    const long i = static_cast<long>(v);
    if (static_cast<double>(i) != v)
      throw InputError("prior: expected an integer");
    return i;
  }
  bool done() const { return pos_ == tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

GaussianMixturePrior read_prior(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("prior: cannot open " + path);
  TokenReader r(tokenize(in));

  r.expect("dim");
  const long n = r.integer();
  if (n < 1) throw InputError("prior: dim must be >= 1");
  r.expect("components");
  const long k = r.integer();
  if (k < 1) throw InputError("prior: components must be >= 1");

  r.expect("weights");
  Vec w(k);
  for (long i = 0; i < k; ++i) w[i] = r.number();

  std::vector<Vec> means;
  std::vector<Mat> covs;
  for (long c = 0; c < k; ++c) {
    r.expect("mean");
    Vec mu(n);
    for (long i = 0; i < n; ++i) mu[i] = r.number();
    r.expect("cov");
    Mat cov(n, n);
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) cov(i, j) = r.number();
    means.push_back(std::move(mu));
    covs.push_back(std::move(cov));
  }
  if (!r.done()) throw InputError("prior: trailing tokens in " + path);
  try {
    return GaussianMixturePrior(std::move(w), std::move(means),
                                std::move(covs));
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("prior: ") + e.what());
  }
}

void write_prior(const std::string& path, const GaussianMixturePrior& prior) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("prior: cannot open " + path + " for writing");
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "dim " << prior.dim() << "\n";
  out << "components " << prior.components() << "\n";
  out << "weights";
  for (int k = 0; k < prior.components(); ++k)
    out << " " << num(prior.weights()[k]);
  out << "\n";
  for (int k = 0; k < prior.components(); ++k) {
    out << "mean";
    for (int i = 0; i < prior.dim(); ++i) out << " " << num(prior.mean(k)[i]);
    out << "\ncov\n";
    for (int i = 0; i < prior.dim(); ++i) {
      for (int j = 0; j < prior.dim(); ++j)
        out << (j ? " " : "") << num(prior.cov(k)(i, j));
      out << "\n";
    }
  }
  if (!out) throw InputError("prior: write failed for " + path);
}

GaussianMixturePrior builtin_gaussian() {
  const int n = 8;
  Vec d(n);
  d << 16, 8, 4, 2, 1, 0.5, 0.25, 0.125;
  return GaussianMixturePrior(Vec::Ones(1), {Vec::Zero(n)},
                              {Mat(d.asDiagonal())});
}

GaussianMixturePrior builtin_two_component() {
  const int n = 8;
  const Vec m = Vec::Constant(n, 3.0 / std::sqrt(static_cast<double>(n)));
  Vec w(2);
  w << 0.5, 0.5;
  return GaussianMixturePrior(w, {m, -m},
                              {Mat::Identity(n, n), Mat::Identity(n, n)});
}

GaussianMixturePrior builtin_empirical() {
  const int n = 8;
  const int k = 16;
  rng::Stream stream(1234, "builtin-empirical");
  std::vector<Vec> points;
  points.reserve(k);
  for (int i = 0; i < k; ++i) points.push_back(2.0 * stream.normal_vec(n));
  return empirical_prior(points, 0.5);
}

GaussianMixturePrior load_prior(const std::string& spec) {
  if (spec == "builtin:gaussian") return builtin_gaussian();
  if (spec == "builtin:two-component") return builtin_two_component();
  if (spec == "builtin:empirical") return builtin_empirical();
  if (spec.rfind("builtin:", 0) == 0)
    throw InputError("prior: unknown builtin '" + spec + "'");
  return read_prior(spec);
}

}  // namespace etk::io
