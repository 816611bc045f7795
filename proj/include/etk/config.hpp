#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "etk/sampler.hpp"
#include "etk/schedule.hpp"
#include "etk/zeus.hpp"

namespace etk {

// One run's declarative description, parsed from a strict key = value file
// ('#' comments; unknown or duplicate keys are errors; referenced input
// files must exist at load time). See README.md for the key reference.
struct RunConfig {
  int T = 200;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  double eta = 1.0;
  std::uint64_t seed = 0;

  std::string out_dir = ".";
  std::string prior_spec;   // path or builtin:<name>
  std::string signal_spec;  // path or sample:<index>

  EditPlan plan;
  std::vector<std::pair<int, int>> mask_ranges;  // inclusive index ranges
  bool has_mask = false;

  PcParams pc;
  std::string lambda_profile_spec;  // input for fixed-t' zeus edits

  std::uint64_t feature_seed = 17;
  int feature_dim = 8;
  int feature_layers = 4;
  double t0_std = 0.1;

  std::string reference_prior_spec;
  int curve_n_signals = 32;
  std::vector<int> t_start_grid;
  std::vector<Method> curve_methods;

  int lambda_n_signals = 0;
  std::vector<std::string> lambda_bundles;

  std::string out_trajectory = "trajectory.etk";
  std::string out_signal = "edited.etk";
  std::string out_bundle = "pcs.etk";
  std::string out_profile = "lambda.etk";
  std::string out_curve = "curve.csv";
  std::string out_trace;  // per-step CSV when non-empty

  Schedule schedule() const;
  // Joins out_dir with a relative artifact name.
  std::string out_path(const std::string& name) const;
};

RunConfig load_config(const std::string& path);

Method parse_method(const std::string& name);
Condition parse_condition(const std::string& text);
// "i:coeff,i:coeff" with 1-based component indices.
std::vector<std::pair<int, double>> parse_pc_selector(const std::string& text);
// "a-b,c" inclusive index ranges.
std::vector<std::pair<int, int>> parse_index_ranges(const std::string& text);
// Expands ranges to a 0/1 vector of length dim.
Vec mask_from_ranges(const std::vector<std::pair<int, int>>& ranges, int dim);

}  // namespace etk
