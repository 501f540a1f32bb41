#include "nmar/theta.hpp"

#include <cmath>

#include "nmar/numerics.hpp"
#include "nmar/rng.hpp"

namespace nmar {

namespace {

// Componentwise tilted conditional expectation of zeta at one row.
VectorXd tilted_zeta(const MomentProvider& provider, const VectorXd& x, const VectorXd& beta,
                     const ZetaFn& zeta, int dim, const VectorXd& theta) {
  VectorXd out(dim);
  for (int c = 0; c < dim; ++c) {
    out[c] = provider.tilted_ratio(
        x, beta, [&](double y) { return zeta(x, y, theta)[c]; });
  }
  return out;
}

}  // namespace

double estimate_theta_mean(const Sample& sample, const ModelSpec& spec,
                           const MomentProvider& provider, const VectorXd& beta_hat) {
  sample.validate();
  if (beta_hat.size() != spec.h.dim()) throw ConfigError("tilt estimate has wrong dimension");
  double acc = 0.0;
  for (const auto& o : sample.obs) {
    acc += (o.r == 1) ? o.y() : provider.tilted_mean(o.x, beta_hat);
  }
  return acc / static_cast<double>(sample.size());
}

ThetaFit solve_theta(const Sample& sample, const ModelSpec& spec, const MomentProvider& provider,
                     const VectorXd& beta_hat, const ZetaFn& zeta, int dim_theta,
                     const SolverOptions& opts) {
  sample.validate();
  if (dim_theta < 1) throw ConfigError("functional dimension must be positive");
  const int n = sample.size();

  auto moment = [&](const VectorXd& theta) {
    VectorXd acc = VectorXd::Zero(dim_theta);
    for (const auto& o : sample.obs) {
      if (o.r == 1) {
        acc += zeta(o.x, o.y(), theta);
      } else {
        acc += tilted_zeta(provider, o.x, beta_hat, zeta, dim_theta, theta);
      }
    }
    return VectorXd((acc / static_cast<double>(n)).eval());
  };

  VectorXd theta = opts.init.size() ? opts.init : VectorXd::Zero(dim_theta);
  if (theta.size() != dim_theta) throw ConfigError("initial functional value has wrong dimension");

  ThetaFit fit;
  for (int it = 0; it < opts.max_iter; ++it) {
    const VectorXd res = moment(theta);
    if (!res.allFinite()) throw NoConvergence("functional moment became non-finite", theta, it);
    if (res.norm() < opts.tol_residual) {
      fit.theta = theta;
      fit.converged = true;
      fit.iterations = it;
      return fit;
    }
    const MatrixXd jac = fd_jacobian(moment, theta);
    Eigen::FullPivLU<MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw SingularJacobian("functional moment derivative is singular");
    const VectorXd step = lu.solve(-res);
    theta += step;
    fit.iterations = it + 1;
    if (step.norm() < opts.tol_step * (1.0 + theta.norm())) {
      if (moment(theta).norm() < opts.tol_residual) {
        fit.theta = theta;
        fit.converged = true;
        return fit;
      }
      throw NoConvergence("functional solve stalled above tolerance", theta, it + 1);
    }
  }
  throw NoConvergence("functional solve exhausted its iteration budget", theta, opts.max_iter);
}

VectorXd bootstrap_se(const Sample& sample,
                      const std::function<VectorXd(const Sample&)>& estimator, int n_resamples,
                      std::uint64_t seed) {
  sample.validate();
  if (n_resamples < 2) throw ConfigError("bootstrap needs at least two resamples");
  const int n = sample.size();
  std::vector<VectorXd> draws;
  draws.reserve(n_resamples);
  int failed = 0;
  for (int b = 0; b < n_resamples; ++b) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
    Sample res;
    res.u_cols = sample.u_cols;
    res.z_cols = sample.z_cols;
    res.obs.reserve(n);
    for (int i = 0; i < n; ++i) {
      res.obs.push_back(sample.obs[rng.index(static_cast<std::uint64_t>(n))]);
    }
    try {
      draws.push_back(estimator(res));
    } catch (const NumericalError&) {
      ++failed;
    } catch (const DataError&) {
      ++failed;  // e.g. a resample that lost every respondent
    }
  }
  if (failed * 10 > n_resamples) {
    throw BootstrapUnstable("too many bootstrap resamples failed", failed, n_resamples);
  }
  if (draws.size() < 2) throw BootstrapUnstable("bootstrap produced fewer than two estimates",
                                                failed, n_resamples);
  const int dim = static_cast<int>(draws.front().size());
  VectorXd se(dim);
  for (int c = 0; c < dim; ++c) {
    std::vector<double> vals;
    vals.reserve(draws.size());
    for (const auto& d : draws) vals.push_back(d[c]);
    se[c] = sample_sd(vals);
  }
  return se;
}

MatrixXd theta_influence_variance(const Sample& sample, const ModelSpec& spec,
                                  const MomentProvider& provider, const VectorXd& beta_hat,
                                  const VectorXd& theta_hat, const ZetaFn& zeta,
                                  ThetaInfluenceDiag* diag,
                                  const MomentProvider* beta_provider) {
  sample.validate();
  const int n = sample.size();
  const int dim = static_cast<int>(theta_hat.size());
  const int d = static_cast<int>(beta_hat.size());

  // Influence of the tilt fit, with its own nuisance corrections.
  const SandwichResult sw =
      beta_sandwich(sample, spec, beta_provider ? *beta_provider : provider, beta_hat);
  Eigen::FullPivLU<MatrixXd> bread_lu(sw.bread);
  if (!bread_lu.isInvertible()) throw SingularJacobian("sandwich bread matrix is singular");
  const MatrixXd phi_beta = -(bread_lu.inverse() * sw.psi.transpose()).transpose();  // n x d

  // Tilted moment rows at (beta_hat, theta_hat).
  MatrixXd ratio(n, dim);
  MatrixXd zeta_obs = MatrixXd::Zero(n, dim);
  for (int i = 0; i < n; ++i) {
    const auto& o = sample.obs[i];
    ratio.row(i) = tilted_zeta(provider, o.x, beta_hat, zeta, dim, theta_hat).transpose();
    if (o.r == 1) zeta_obs.row(i) = zeta(o.x, o.y(), theta_hat).transpose();
  }

  VectorXd base_mean = VectorXd::Zero(dim);
  for (int i = 0; i < n; ++i) {
    base_mean += (sample.obs[i].r == 1) ? zeta_obs.row(i).transpose() : ratio.row(i).transpose();
  }
  base_mean /= static_cast<double>(n);

  // Derivative of the imputed block in the tilt, by difference quotient;
  // only nonrespondent rows carry the imputation.
  MatrixXd d_beta = MatrixXd::Zero(dim, d);
  for (int j = 0; j < d; ++j) {
    const double step = 1e-5 * (1.0 + std::abs(beta_hat[j]));
    VectorXd beta2 = beta_hat;
    beta2[j] += step;
    VectorXd acc = VectorXd::Zero(dim);
    for (int i = 0; i < n; ++i) {
      if (sample.obs[i].r == 1) continue;
      const VectorXd r2 = tilted_zeta(provider, sample.obs[i].x, beta2, zeta, dim, theta_hat);
      acc += (r2 - ratio.row(i).transpose()) / step;
    }
    d_beta.col(j) = acc / static_cast<double>(n);
  }

  // Provider-specific first-stage correction rows.
  MatrixXd k_alpha = MatrixXd::Zero(n, dim);
  if (provider.kind() == ProviderKind::parametric) {
    const auto& par = dynamic_cast<const ParametricProvider&>(provider);
    const VectorXd eta = par.nuisance();
    const int m = static_cast<int>(eta.size());
    MatrixXd d_eta(dim, m);
    for (int c = 0; c < m; ++c) {
      const double step = 1e-5 * (1.0 + std::abs(eta[c]));
      const auto pert = par.perturbed(c, step);
      VectorXd acc = VectorXd::Zero(dim);
      for (int i = 0; i < n; ++i) {
        if (sample.obs[i].r == 1) continue;
        const VectorXd r2 = tilted_zeta(*pert, sample.obs[i].x, beta_hat, zeta, dim, theta_hat);
        acc += (r2 - ratio.row(i).transpose()) / step;
      }
      d_eta.col(c) = acc / static_cast<double>(n);
    }
    for (int i = 0; i < n; ++i) {
      k_alpha.row(i) = (d_eta * par.nuisance_influence(i)).transpose();
    }
  } else if (provider.kind() == ProviderKind::nonparametric) {
    const auto& np = dynamic_cast<const NonparametricProvider&>(provider);
    for (int i = 0; i < n; ++i) {
      const auto& o = sample.obs[i];
      if (o.r != 1) continue;
      const double rate = np.response_rate(o.x);
      if (!(rate > 0.0)) throw DegenerateConditional("smoothed response rate vanished");
      const double e1 = std::exp(-spec.h.value(o.y(), beta_hat));
      const double d1 = np.inner_moments(o.x, beta_hat).d1;
      const double scale = (1.0 - rate) * e1 / (d1 * rate);
      k_alpha.row(i) = scale * (zeta_obs.row(i) - ratio.row(i));
    }
  }

  MatrixXd phi(n, dim);
  for (int i = 0; i < n; ++i) {
    const VectorXd lead =
        (sample.obs[i].r == 1) ? zeta_obs.row(i).transpose() : ratio.row(i).transpose();
    phi.row(i) = (lead - base_mean + d_beta * phi_beta.row(i).transpose() +
                  k_alpha.row(i).transpose())
                     .transpose();
  }

  // Derivative of the moment map in theta.
  auto moment_at = [&](const VectorXd& theta) {
    VectorXd acc = VectorXd::Zero(dim);
    for (int i = 0; i < n; ++i) {
      const auto& o = sample.obs[i];
      acc += (o.r == 1) ? zeta(o.x, o.y(), theta)
                        : tilted_zeta(provider, o.x, beta_hat, zeta, dim, theta);
    }
    return VectorXd((acc / static_cast<double>(n)).eval());
  };
  const MatrixXd a_theta = fd_jacobian(moment_at, theta_hat);

  const MatrixXd v = (phi.transpose() * phi) / static_cast<double>(n);
  Eigen::FullPivLU<MatrixXd> lu(a_theta);
  if (!lu.isInvertible()) throw SingularJacobian("functional moment derivative is singular");
  const MatrixXd ainv = lu.inverse();
  MatrixXd cov = ainv * v * ainv.transpose() / static_cast<double>(n);
  cov = 0.5 * (cov + cov.transpose()).eval();

  if (diag) {
    diag->v = v;
    diag->a_theta = a_theta;
    diag->k_alpha_norm = k_alpha.norm();
  }
  return cov;
}

}  // namespace nmar
