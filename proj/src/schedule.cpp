#include "etk/schedule.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "etk/rng.hpp"

namespace etk {

namespace {

std::uint64_t mix_bits(std::uint64_t h, std::uint64_t v) {
  return rng::splitmix64(h ^ (v + rng::kGolden));
}

std::uint64_t double_bits(double x) {
  std::uint64_t b = 0;
  std::memcpy(&b, &x, sizeof b);
  return b;
}

}  // namespace

std::uint64_t Schedule::hash() const {
  std::uint64_t h = rng::hash_name("schedule-v1");
  h = mix_bits(h, static_cast<std::uint64_t>(T));
  h = mix_bits(h, double_bits(beta_min));
  h = mix_bits(h, double_bits(beta_max));
  h = mix_bits(h, double_bits(eta));
  return h;
}

Schedule build_schedule(int T, double beta_min, double beta_max, double eta) {
  if (T < 2) throw std::invalid_argument("schedule: T must be >= 2");
  if (!(beta_min > 0.0))
    throw std::invalid_argument("schedule: beta_min must be > 0");
  if (!(beta_max < 1.0))
    throw std::invalid_argument("schedule: beta_max must be < 1");
  if (!(beta_min <= beta_max))
    throw std::invalid_argument("schedule: beta_min must be <= beta_max");
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::invalid_argument("schedule: eta must lie in [0, 1]");

  Schedule s;
  s.T = T;
  s.beta_min = beta_min;
  s.beta_max = beta_max;
  s.eta = eta;
  s.beta = Vec::Zero(T + 1);
  s.alpha_bar = Vec::Zero(T + 1);
  s.sigma = Vec::Zero(T + 1);

  s.alpha_bar[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    s.beta[t] = beta_min + (beta_max - beta_min) * (t - 1) / (T - 1);
    s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t]);
    s.sigma[t] = eta *
                 std::sqrt((1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t])) *
                 std::sqrt(1.0 - s.alpha_bar[t] / s.alpha_bar[t - 1]);
  }
  return s;
}

void require_timestep(const Schedule& s, int t) {
  if (t < 1 || t > s.T)
    throw std::invalid_argument("schedule: timestep " + std::to_string(t) +
                                " outside [1, " + std::to_string(s.T) + "]");
}

double equivalent_noise_std(const Schedule& s, int t) {
  require_timestep(s, t);
  return std::sqrt((1.0 - s.alpha_bar[t]) / s.alpha_bar[t]);
}

double drift_coefficient(const Schedule& s, int t) {
  require_timestep(s, t);
  const double radicand =
      1.0 - s.alpha_bar[t - 1] - s.sigma[t] * s.sigma[t];
  if (radicand < 0.0)
    throw std::domain_error(
        "schedule: 1 - abar_{t-1} - sigma_t^2 negative at t = " +
        std::to_string(t));
  return std::sqrt(s.alpha_bar[t - 1]) -
         std::sqrt(s.alpha_bar[t]) * std::sqrt(radicand) /
             std::sqrt(1.0 - s.alpha_bar[t]);
}

}  // namespace etk
