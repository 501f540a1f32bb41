#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nmar/errors.hpp"

namespace nmar {

using KeyValues = std::map<std::string, std::string>;

// Flat key=value file with # comments and blank lines. Duplicate keys keep
// the last occurrence.
KeyValues parse_config_file(const std::string& path);

// Fully resolved run settings: built-in defaults, then the config file, then
// command-line values, each layer overriding the previous one. Unknown keys
// in either layer are rejected by name.
struct RunConfig {
  std::string mode;  // "simulate" | "estimate"

  // simulate
  std::string design = "A";
  int n = 1000;
  int replicates = 1000;
  std::uint64_t seed = 20250801;
  std::string provider = "oracle";
  std::string gstar;  // simulate default "working", estimate default "zero"
  std::string kernel = "gaussian:c=1.5:gamma=1/3";
  std::string kernel_outer;  // empty: same as kernel
  std::string theta_kernel;  // empty: same as kernel
  int bootstrap = 200;
  std::string theta_se = "bootstrap";  // bootstrap | influence | none
  int se_subset = -1;
  std::string estimators;  // comma list; empty: design default
  std::string out;
  std::string format = "auto";  // auto | text | csv

  // estimate
  std::string input;
  std::string ycol = "y";
  std::string rcol;
  std::vector<std::string> ucols;
  std::vector<std::string> zcols;

  // solver
  double init = 0.0;
  double tol_residual = 1e-8;
  double tol_step = 1e-10;
  int max_iter = 100;

  void validate() const;  // mode-aware sanity checks; throws ConfigError
};

RunConfig build_run_config(const std::string& mode, const KeyValues& file_values,
                           const KeyValues& cli_values);

std::vector<std::string> split_list(const std::string& text);  // comma-separated

}  // namespace nmar
