#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nmar/design.hpp"
#include "nmar/theta.hpp"

namespace nmar {

// A simulated dataset plus the latent outcomes the generator drew for every
// row, including nonrespondents; only the simulator can know the latter.
struct SimSample {
  Sample sample;
  VectorXd latent_y;
};

// Draws n rows from the design: instrument category, covariates around it,
// outcome from the respondent law or its tilted complement, then the
// response indicator from the propensity at the drawn outcome.
SimSample generate(const Design& design, int n, std::uint64_t seed);

// Complete-case mean of the observed outcomes.
double naive_estimator(const Sample& sample);

// Mean of the latent outcomes over all rows; throws OracleUnavailable when
// the latent vector is absent.
double oracle_estimator(const SimSample& sim);

enum class EstimatorId { beta_working, theta_working, oracle_mean, naive_mean };

std::string estimator_label(EstimatorId id);
EstimatorId estimator_by_label(const std::string& label);

enum class ThetaSeMethod { bootstrap, influence, none };

struct McOptions {
  ProviderKind provider = ProviderKind::oracle;
  GFunction gstar = GFunction::zero(1);  // working shift handed to the score
  KernelSpec kernel_x;
  KernelSpec kernel_u;
  KernelSpec kernel_theta;
  int bootstrap_resamples = 200;
  ThetaSeMethod theta_se = ThetaSeMethod::bootstrap;
  // Compute the (expensive) theta standard error only for the first k
  // replicates; negative means all of them.
  int se_subset = -1;
  SolverOptions solver;
};

struct MetricsRow {
  std::string label;
  double truth = 0.0;
  int n_replicates = 0;  // attempted
  int n_failures = 0;
  int n_se = 0;  // replicates contributing to se and coverage
  double bias = 0.0;
  double sd = 0.0;
  double rmse = 0.0;
  double se = 0.0;   // mean of per-replicate standard errors
  double cvp = 0.0;  // percent of nominal-95% intervals covering the truth
  bool flagged = false;
};

// Summarizes per-replicate estimates against the truth. Standard errors may
// be NaN for replicates where they were skipped; those rows still count for
// bias/sd/rmse but not for se or coverage. Rows with more than 5% failed
// replicates come back flagged.
MetricsRow aggregate_metrics(const std::string& label, double truth,
                             const std::vector<double>& estimates,
                             const std::vector<double>& std_errors, int n_failures);

// Runs the full replicate loop. Replicate k draws its data from
// (master_seed, k) regardless of scheduling, so results are reproducible.
std::vector<MetricsRow> run_monte_carlo(const Design& design, int n, int replicates,
                                        const std::vector<EstimatorId>& roster,
                                        std::uint64_t master_seed, const McOptions& opts);

}  // namespace nmar
