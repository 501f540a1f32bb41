#include "nmar/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace nmar {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "design", "n",      "replicates",  "seed",        "provider",  "gstar",
      "kernel", "kernel_outer", "theta_kernel", "bootstrap",   "theta_se", "se_subset",
      "estimators", "out", "format",     "input",       "ycol",      "rcol",
      "ucols",  "zcols",  "init",        "tol_residual", "tol_step", "max_iter",
  };
  return keys;
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError("key '" + key + "': cannot parse integer '" + value + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse number '" + value + "'");
  }
}

void apply(RunConfig& cfg, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (!known_keys().count(key)) throw ConfigError("unknown configuration key '" + key + "'");
    if (key == "design") cfg.design = value;
    else if (key == "n") cfg.n = static_cast<int>(parse_int(key, value));
    else if (key == "replicates") cfg.replicates = static_cast<int>(parse_int(key, value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "provider") cfg.provider = value;
    else if (key == "gstar") cfg.gstar = value;
    else if (key == "kernel") cfg.kernel = value;
    else if (key == "kernel_outer") cfg.kernel_outer = value;
    else if (key == "theta_kernel") cfg.theta_kernel = value;
    else if (key == "bootstrap") cfg.bootstrap = static_cast<int>(parse_int(key, value));
    else if (key == "theta_se") cfg.theta_se = value;
    else if (key == "se_subset") cfg.se_subset = static_cast<int>(parse_int(key, value));
    else if (key == "estimators") cfg.estimators = value;
    else if (key == "out") cfg.out = value;
    else if (key == "format") cfg.format = value;
    else if (key == "input") cfg.input = value;
    else if (key == "ycol") cfg.ycol = value;
    else if (key == "rcol") cfg.rcol = value;
    else if (key == "ucols") cfg.ucols = split_list(value);
    else if (key == "zcols") cfg.zcols = split_list(value);
    else if (key == "init") cfg.init = parse_double(key, value);
    else if (key == "tol_residual") cfg.tol_residual = parse_double(key, value);
    else if (key == "tol_step") cfg.tol_step = parse_double(key, value);
    else if (key == "max_iter") cfg.max_iter = static_cast<int>(parse_int(key, value));
  }
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string part;
  std::stringstream ss(text);
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

KeyValues parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

void RunConfig::validate() const {
  if (mode != "simulate" && mode != "estimate")
    throw ConfigError("mode must be 'simulate' or 'estimate'");
  if (provider != "oracle" && provider != "parametric" && provider != "nonparametric")
    throw ConfigError("unknown provider '" + provider + "'");
  if (theta_se != "bootstrap" && theta_se != "influence" && theta_se != "none")
    throw ConfigError("theta_se must be bootstrap, influence, or none");
  if (format != "auto" && format != "text" && format != "csv")
    throw ConfigError("format must be auto, text, or csv");
  if (mode == "simulate") {
    if (n < 10) throw ConfigError("sample size must be at least 10");
    if (replicates < 1) throw ConfigError("replicate count must be positive");
  } else {
    if (input.empty()) throw ConfigError("estimate mode needs an input file");
    if (ycol.empty()) throw ConfigError("estimate mode needs the outcome column name");
    if (ucols.empty()) throw ConfigError("estimate mode needs at least one u column");
    for (const auto& u : ucols) {
      for (const auto& z : zcols) {
        if (u == z) throw ConfigError("column '" + u + "' appears in both ucols and zcols");
      }
    }
  }
  if (bootstrap < 0) throw ConfigError("bootstrap resample count cannot be negative");
  if (!(tol_residual > 0.0)) throw ConfigError("tol_residual must be positive");
  if (!(tol_step > 0.0)) throw ConfigError("tol_step must be positive");
  if (max_iter < 1) throw ConfigError("max_iter must be positive");
}

RunConfig build_run_config(const std::string& mode, const KeyValues& file_values,
                           const KeyValues& cli_values) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.gstar = (mode == "simulate") ? "working" : "zero";
  apply(cfg, file_values);
  apply(cfg, cli_values);
  cfg.validate();
  return cfg;
}

}  // namespace nmar
