#include "etk/config.hpp"

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "etk/errors.hpp"

namespace etk {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
  throw InputError("config: key '" + key + "': cannot parse '" + value +
                   "' as " + want);
}

long long parse_ll(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(value, &pos);
    if (pos != value.size()) bad_value(key, value, "an integer");
    return v;
  } catch (const InputError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value, "an integer");
  }
}

int parse_int(const std::string& key, const std::string& value) {
  return static_cast<int>(parse_ll(key, value));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size() || value[0] == '-')
      bad_value(key, value, "a non-negative integer");
    return v;
  } catch (const InputError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value, "a non-negative integer");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) bad_value(key, value, "a real number");
    return v;
  } catch (const InputError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value, "a real number");
  }
}

void require_input_file(const std::string& key, const std::string& path) {
  if (!std::filesystem::exists(path))
    throw InputError("config: key '" + key + "': file not found: " + path);
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "replay") return Method::kDdpmReplay;
  if (name == "zeta") return Method::kZeta;
  if (name == "sdedit") return Method::kSdedit;
  if (name == "ddim") return Method::kDdim;
  if (name == "ddim-partial") return Method::kDdimPartial;
  if (name == "zeus") return Method::kZeus;
  throw InputError("config: unknown method '" + name +
                   "' (replay, zeta, sdedit, ddim, ddim-partial, zeus)");
}

Condition parse_condition(const std::string& text) {
  if (text == "unconditional") return Condition::unconditional();
  const std::string prefix = "weights:";
  if (text.rfind(prefix, 0) != 0)
    throw InputError("config: condition must be 'unconditional' or "
                     "'weights:a,b,...', got '" + text + "'");
  std::vector<std::string> parts = split(text.substr(prefix.size()), ',');
  Vec w(static_cast<int>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i)
    w[static_cast<int>(i)] = parse_double("condition", parts[i]);
  try {
    return Condition::component_weights(w);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("config: condition: ") + e.what());
  }
}

std::vector<std::pair<int, double>> parse_pc_selector(const std::string& text) {
  std::vector<std::pair<int, double>> sel;
  for (const std::string& item : split(text, ',')) {
    std::size_t colon = item.find(':');
    if (colon == std::string::npos)
      throw InputError("config: pc selector entries are 'index:coeff', got '" +
                       item + "'");
    sel.emplace_back(parse_int("pc", item.substr(0, colon)),
                     parse_double("pc", item.substr(colon + 1)));
  }
  if (sel.empty()) throw InputError("config: empty pc selector");
  return sel;
}

std::vector<std::pair<int, int>> parse_index_ranges(const std::string& text) {
  std::vector<std::pair<int, int>> ranges;
  for (const std::string& item : split(text, ',')) {
    std::size_t dash = item.find('-');
    int lo, hi;
    if (dash == std::string::npos) {
      lo = hi = parse_int("mask", item);
    } else {
      lo = parse_int("mask", item.substr(0, dash));
      hi = parse_int("mask", item.substr(dash + 1));
    }
    if (lo < 0 || hi < lo)
      throw InputError("config: bad mask range '" + item + "'");
    ranges.emplace_back(lo, hi);
  }
  if (ranges.empty()) throw InputError("config: empty mask");
  return ranges;
}

Vec mask_from_ranges(const std::vector<std::pair<int, int>>& ranges, int dim) {
  Vec mask = Vec::Zero(dim);
  for (const auto& [lo, hi] : ranges) {
    if (hi >= dim)
      throw InputError("config: mask index " + std::to_string(hi) +
                       " out of range for dimension " + std::to_string(dim));
    for (int i = lo; i <= hi; ++i) mask[i] = 1.0;
  }
  return mask;
}

Schedule RunConfig::schedule() const {
  try {
    return build_schedule(T, beta_min, beta_max, eta);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("config: schedule: ") + e.what());
  }
}

std::string RunConfig::out_path(const std::string& name) const {
  return (std::filesystem::path(out_dir) / name).string();
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("config: cannot open " + path);

  RunConfig cfg;
  cfg.plan.guidance_src = 3.0;
  cfg.plan.guidance_tgt = 12.0;

  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("config: line " + std::to_string(line_no) +
                       ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw InputError("config: line " + std::to_string(line_no) +
                       ": empty key or value");
    if (!seen.insert(key).second)
      throw InputError("config: duplicate key '" + key + "' (line " +
                       std::to_string(line_no) + ")");

    if (key == "schedule.T") cfg.T = parse_int(key, value);
    else if (key == "schedule.beta_min") cfg.beta_min = parse_double(key, value);
    else if (key == "schedule.beta_max") cfg.beta_max = parse_double(key, value);
    else if (key == "schedule.eta") cfg.eta = parse_double(key, value);
    else if (key == "seed") {
      cfg.seed = parse_u64(key, value);
      cfg.plan.seed = cfg.seed;
    } else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "prior") cfg.prior_spec = value;
    else if (key == "signal") cfg.signal_spec = value;
    else if (key == "plan.method") cfg.plan.method = parse_method(value);
    else if (key == "plan.cond_src") cfg.plan.cond_src = parse_condition(value);
    else if (key == "plan.cond_tgt") cfg.plan.cond_tgt = parse_condition(value);
    else if (key == "plan.w_src") cfg.plan.guidance_src = parse_double(key, value);
    else if (key == "plan.w_tgt") cfg.plan.guidance_tgt = parse_double(key, value);
    else if (key == "plan.T_start") cfg.plan.T_start = parse_int(key, value);
    else if (key == "plan.T_end") cfg.plan.T_end = parse_int(key, value);
    else if (key == "plan.t_prime") {
      if (value == "per-step") cfg.plan.t_prime_per_step = true;
      else cfg.plan.t_prime = parse_int(key, value);
    } else if (key == "plan.gamma") cfg.plan.gamma = parse_double(key, value);
    else if (key == "plan.pc") cfg.plan.pc_selector = parse_pc_selector(value);
    else if (key == "plan.mask") {
      cfg.mask_ranges = parse_index_ranges(value);
      cfg.has_mask = true;
    } else if (key == "plan.delta") cfg.plan.delta = parse_double(key, value);
    else if (key == "plan.sdedit_source_prompt") {
      if (value == "true") cfg.plan.sdedit_source_prompt = true;
      else if (value == "false") cfg.plan.sdedit_source_prompt = false;
      else bad_value(key, value, "true or false");
    } else if (key == "zeus.n_pcs") cfg.pc.n_pcs = parse_int(key, value);
    else if (key == "zeus.iters") cfg.pc.iters = parse_int(key, value);
    else if (key == "zeus.probe_c") cfg.pc.probe_c = parse_double(key, value);
    else if (key == "zeus.rho") cfg.pc.rho = parse_double(key, value);
    else if (key == "lambda_profile") cfg.lambda_profile_spec = value;
    else if (key == "lambda.n_signals") cfg.lambda_n_signals = parse_int(key, value);
    else if (key == "lambda.bundles") cfg.lambda_bundles = split(value, ',');
    else if (key == "eval.feature_seed") cfg.feature_seed = parse_u64(key, value);
    else if (key == "eval.feature_dim") cfg.feature_dim = parse_int(key, value);
    else if (key == "eval.layers") cfg.feature_layers = parse_int(key, value);
    else if (key == "eval.t0_std") cfg.t0_std = parse_double(key, value);
    else if (key == "eval.reference_prior") cfg.reference_prior_spec = value;
    else if (key == "curve.n_signals") cfg.curve_n_signals = parse_int(key, value);
    else if (key == "curve.t_start_grid") {
      for (const std::string& item : split(value, ','))
        cfg.t_start_grid.push_back(parse_int(key, item));
    } else if (key == "curve.methods") {
      for (const std::string& item : split(value, ','))
        cfg.curve_methods.push_back(parse_method(item));
    } else if (key == "out.trajectory") cfg.out_trajectory = value;
    else if (key == "out.signal") cfg.out_signal = value;
    else if (key == "out.bundle") cfg.out_bundle = value;
    else if (key == "out.profile") cfg.out_profile = value;
    else if (key == "out.curve") cfg.out_curve = value;
    else if (key == "out.trace") cfg.out_trace = value;
    else throw InputError("config: unknown key '" + key + "' (line " +
                          std::to_string(line_no) + ")");
  }

  if (!cfg.prior_spec.empty() && cfg.prior_spec.rfind("builtin:", 0) != 0)
    require_input_file("prior", cfg.prior_spec);
  if (!cfg.signal_spec.empty() && cfg.signal_spec.rfind("sample:", 0) != 0)
    require_input_file("signal", cfg.signal_spec);
  if (!cfg.lambda_profile_spec.empty())
    require_input_file("lambda_profile", cfg.lambda_profile_spec);
  for (const std::string& b : cfg.lambda_bundles)
    require_input_file("lambda.bundles", b);
  return cfg;
}

}  // namespace etk
