#pragma once

#include <string>
#include <vector>

#include "nmar/config.hpp"
#include "nmar/csv.hpp"
#include "nmar/report.hpp"

namespace nmar {

// Builds a covariate shift from its textual form: "zero", "true", "working",
// "affine:c0,a1,..,aq", or "quad:c0,a1,..,aq,b1,..,bq". The "true" and
// "working" names resolve against a design and are rejected without one.
GFunction parse_gstar(const std::string& text, int dim_u, const Design* design);

struct SimulateOutcome {
  std::vector<MetricsRow> rows;
  std::string text_table;
  std::string csv_text;
};

// Full simulate-mode run: resolve the design, working shift, kernels, and
// roster; run the replicate loop; render both report forms; write the output
// file when one was requested.
SimulateOutcome run_simulate(const RunConfig& cfg);

struct EstimateOutcome {
  BetaFit fit;
  double theta = 0.0;
  double theta_se = 0.0;
  std::string theta_se_method = "none";
  LoadStats stats;
  std::string text;
  std::string csv_text;
};

// Full estimate-mode run on a dataset loaded from disk.
EstimateOutcome run_estimate(const RunConfig& cfg);

}  // namespace nmar
