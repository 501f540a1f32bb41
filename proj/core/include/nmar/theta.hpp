#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>

#include "nmar/estimator.hpp"

namespace nmar {

// Plug-in estimate of E[Y]: observed outcomes enter as-is, missing ones are
// imputed by the tilted respondent conditional mean at the fitted tilt.
double estimate_theta_mean(const Sample& sample, const ModelSpec& spec,
                           const MomentProvider& provider, const VectorXd& beta_hat);

// A general moment function zeta(x, y, theta) whose population mean is zero
// at the target functional.
using ZetaFn = std::function<VectorXd(const VectorXd& x, double y, const VectorXd& theta)>;

struct ThetaFit {
  VectorXd theta;
  MatrixXd cov;
  VectorXd se;
  std::string se_method = "none";
  int iterations = 0;
  bool converged = false;
};

// Solves mean_i[ r zeta(x_i, y_i, t) + (1-r) E{zeta(x_i, Y, t) | x_i, R=1, tilted} ] = 0
// for t by damped Newton on difference quotients.
ThetaFit solve_theta(const Sample& sample, const ModelSpec& spec, const MomentProvider& provider,
                     const VectorXd& beta_hat, const ZetaFn& zeta, int dim_theta,
                     const SolverOptions& opts = {});

// Nonparametric bootstrap standard errors for an arbitrary re-fitting
// closure. Resample b of replicate draws is seeded from (seed, b), so the
// result does not depend on evaluation order. Throws BootstrapUnstable when
// more than a tenth of the resamples fail with a numerical error.
VectorXd bootstrap_se(const Sample& sample,
                      const std::function<VectorXd(const Sample&)>& estimator, int n_resamples,
                      std::uint64_t seed);

struct ThetaInfluenceDiag {
  MatrixXd v;            // second moment of the influence rows
  MatrixXd a_theta;      // derivative of the moment map in theta
  double k_alpha_norm = 0.0;  // size of the first-stage correction block
};

// Asymptotic covariance of theta-hat from its influence expansion: the
// centered moment rows, a derivative-in-beta term propagating the tilt fit,
// and a provider-specific first-stage correction. Already divided by N.
// When the tilt was fitted with a different provider (e.g. different kernel
// bandwidths), pass it as beta_provider so the tilt influence matches.
MatrixXd theta_influence_variance(const Sample& sample, const ModelSpec& spec,
                                  const MomentProvider& provider, const VectorXd& beta_hat,
                                  const VectorXd& theta_hat, const ZetaFn& zeta,
                                  ThetaInfluenceDiag* diag = nullptr,
                                  const MomentProvider* beta_provider = nullptr);

}  // namespace nmar
