#pragma once

#include <string>

#include "etk/denoiser.hpp"

namespace etk::io {

// Plain-text prior format (whitespace-tokenized, '#' starts a comment):
//   dim <n>
//   components <K>
//   weights <w_1> ... <w_K>
//   then per component:
//   mean <n values>
//   cov <n * n values, row-major>
GaussianMixturePrior read_prior(const std::string& path);
void write_prior(const std::string& path, const GaussianMixturePrior& prior);

// Resolves either a file path or one of the built-in specs:
//   builtin:gaussian       anisotropic single Gaussian, dim 8
//   builtin:two-component  two well-separated equal components, dim 8
//   builtin:empirical      16-point kernel density estimate, dim 8
GaussianMixturePrior load_prior(const std::string& spec);

GaussianMixturePrior builtin_gaussian();
GaussianMixturePrior builtin_two_component();
GaussianMixturePrior builtin_empirical();

}  // namespace etk::io
