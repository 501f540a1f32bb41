#pragma once

#include <Eigen/Dense>

#include "nmar/score.hpp"

namespace nmar {

struct SolverOptions {
  VectorXd init;                   // empty means zeros
  double bracket_halfwidth = 2.0;  // initial one-sided bracket width (scalar case)
  int max_expansions = 8;
  double tol_residual = 1e-8;      // on the summed estimating equation
  double tol_step = 1e-10;
  double newton_step_cap = 1.0;    // per-iteration step-length limit (vector case)
  int max_iter = 100;
  bool with_se = true;             // fill the sandwich covariance in the fit
};

struct BetaFit {
  VectorXd beta;
  MatrixXd cov;   // sandwich covariance of beta-hat (already divided by N)
  VectorXd se;
  int iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;
  ProviderKind provider = ProviderKind::oracle;
};

// Pieces of the sandwich variance. bread is the mean score derivative, psi
// the per-row influence contributions (score plus any nuisance correction),
// meat their second moment, cov the assembled covariance of beta-hat.
struct SandwichResult {
  MatrixXd bread;
  MatrixXd meat;
  MatrixXd cov;
  MatrixXd psi;  // one row per observation
};

// Root of the summed efficient score in the tilt parameter. Scalar tilts use
// bracketing (geometric expansion with non-finite endpoints pulled back in)
// plus a guaranteed-convergence refiner; multivariate tilts use a damped
// Newton iteration on difference quotients.
BetaFit solve_beta(const Sample& sample, const ModelSpec& spec, const MomentProvider& provider,
                   const SolverOptions& opts = {});

// Sandwich covariance at beta_hat. The influence rows are corrected for the
// estimated nuisance: none for the oracle, difference quotients against the
// fitted regression for the parametric provider, and the kernel-smoothing
// correction for the nonparametric provider.
SandwichResult beta_sandwich(const Sample& sample, const ModelSpec& spec,
                             const MomentProvider& provider, const VectorXd& beta_hat);

// The per-row smoothing correction added to nonparametric influence rows
// (zero on nonrespondent rows); exposed for diagnostics.
MatrixXd smoothing_correction(const Sample& sample, const ModelSpec& spec,
                              const NonparametricProvider& provider, const VectorXd& beta_hat);

}  // namespace nmar
