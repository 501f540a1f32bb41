#include "nmar/estimator.hpp"

#include <cmath>
#include <optional>

#include "nmar/numerics.hpp"

namespace nmar {

namespace {

// Scalar root of the summed score. The equation can brush zero far from the
// center where the tilt saturates, so the search walks outward from the
// initial value in rings and refines inside the nearest sign change; the
// base bracket is widened geometrically only when it contains none.
// Non-finite ring values are skipped, which confines the search to the
// region where the score stays finite.
BetaFit solve_scalar(ScoreEngine& engine, const SolverOptions& opts) {
  const double center = opts.init.size() ? opts.init[0] : 0.0;
  auto f = [&](double b) {
    VectorXd beta(1);
    beta[0] = b;
    return engine.estimating_equation(beta)[0];
  };

  constexpr int kRingsPerSide = 8;
  const double step0 = opts.bracket_halfwidth / kRingsPerSide;
  const double f_center = f(center);
  if (std::isfinite(f_center) && f_center == 0.0) {
    BetaFit fit;
    fit.beta = VectorXd::Constant(1, center);
    fit.converged = true;
    return fit;
  }

  // Values at ring edges, reused as rings advance: index by signed offset.
  double last_hi = center, last_lo = center;
  double f_hi = f_center, f_lo = f_center;
  int evals = 1;
  double found_a = 0.0, found_b = 0.0, ffa = 0.0, ffb = 0.0;
  bool found = false;

  double step = step0;
  int rings_done = 0;
  int expansions = 0;
  while (!found && expansions <= opts.max_expansions) {
    const int rings_this_level = (expansions == 0) ? kRingsPerSide : kRingsPerSide / 2;
    for (int j = 0; j < rings_this_level && !found; ++j) {
      const double hi = last_hi + step;
      const double lo = last_lo - step;
      const double fh = f(hi);
      const double fl = f(lo);
      evals += 2;
      // Nearest crossing wins; check the right interval, then the left.
      if (std::isfinite(f_hi) && std::isfinite(fh) &&
          ((f_hi > 0.0) != (fh > 0.0) || fh == 0.0)) {
        found_a = last_hi;
        found_b = hi;
        ffa = f_hi;
        ffb = fh;
        found = true;
      } else if (std::isfinite(f_lo) && std::isfinite(fl) &&
                 ((f_lo > 0.0) != (fl > 0.0) || fl == 0.0)) {
        found_a = lo;
        found_b = last_lo;
        ffa = fl;
        ffb = f_lo;
        found = true;
      }
      last_hi = hi;
      f_hi = fh;
      last_lo = lo;
      f_lo = fl;
      ++rings_done;
    }
    if (!found) {
      step *= 2.0;  // widen the search geometrically
      ++expansions;
    }
  }
  if (!found) {
    throw NoConvergence("estimating equation shows no sign change on the search bracket",
                        VectorXd::Constant(1, center), rings_done);
  }

  const RootResult root = bracketed_root(f, found_a, found_b, ffa, ffb, opts.max_iter);

  BetaFit fit;
  fit.beta = VectorXd::Constant(1, root.root);
  fit.iterations = rings_done + root.iterations;
  fit.residual_norm = std::abs(f(root.root));
  fit.converged = fit.residual_norm < opts.tol_residual;
  if (!fit.converged) {
    throw NoConvergence("root refinement stalled above the residual tolerance", fit.beta,
                        fit.iterations);
  }
  return fit;
}

// Damped Newton on the summed score for multidimensional tilt families. Far
// from the center the tilt saturates and every per-row score collapses to
// numerical zero, which satisfies the summed equation only vacuously, so a
// root is accepted only where the score field is still alive. Steps are
// capped and backtracked until the residual norm actually drops; evaluation
// failures along the way (overflowed tilts, lost denominators) mean the step
// left the tractable region and likewise shrink it.
BetaFit solve_newton(ScoreEngine& engine, int dim, const SolverOptions& opts) {
  VectorXd beta = opts.init.size() ? opts.init : VectorXd::Zero(dim);
  auto f = [&](const VectorXd& b) { return engine.estimating_equation(b); };
  auto try_f = [&](const VectorXd& b) -> std::optional<VectorXd> {
    try {
      VectorXd r = engine.estimating_equation(b);
      if (!r.allFinite()) return std::nullopt;
      return r;
    } catch (const DegenerateConditional&) {
      return std::nullopt;
    } catch (const NumericalError&) {
      return std::nullopt;
    }
  };
  auto field_alive = [&](const VectorXd& b) {
    return engine.all_scores(b).cwiseAbs().mean() > 1e-8;
  };

  // Failures at the starting point are real errors and propagate.
  VectorXd res = f(beta);
  if (!res.allFinite())
    throw NoConvergence("estimating equation is non-finite at the starting value", beta, 0);

  BetaFit fit;
  for (int it = 0; it < opts.max_iter; ++it) {
    fit.iterations = it;
    fit.residual_norm = res.norm();
    if (fit.residual_norm < opts.tol_residual) {
      if (!field_alive(beta))
        throw NoConvergence("score field collapsed to zero away from any genuine root", beta, it);
      fit.beta = beta;
      fit.converged = true;
      return fit;
    }
    const MatrixXd jac = fd_jacobian(f, beta);
    Eigen::FullPivLU<MatrixXd> lu(jac);
    if (!lu.isInvertible()) throw SingularJacobian("score derivative is singular at an iterate");
    VectorXd step = lu.solve(-res);
    const double cap = opts.newton_step_cap * (1.0 + beta.norm());
    if (step.norm() > cap) step *= cap / step.norm();

    double lambda = 1.0;
    VectorXd next;
    VectorXd res_next;
    bool accepted = false;
    for (int half = 0; half < 24; ++half) {
      next = beta + lambda * step;
      const std::optional<VectorXd> r = try_f(next);
      if (r && r->norm() <= (1.0 - 1e-4 * lambda) * fit.residual_norm) {
        res_next = *r;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted)
      throw NoConvergence("backtracking could not reduce the residual along the Newton direction",
                          beta, it);
    const double move = (next - beta).norm();
    beta = next;
    res = res_next;
    if (move < opts.tol_step * (1.0 + beta.norm())) {
      if (res.norm() < opts.tol_residual && field_alive(beta)) {
        fit.beta = beta;
        fit.converged = true;
        fit.residual_norm = res.norm();
        fit.iterations = it + 1;
        return fit;
      }
      throw NoConvergence("Newton steps collapsed before meeting the residual tolerance", beta,
                          it + 1);
    }
  }
  throw NoConvergence("iteration budget exhausted", beta, opts.max_iter);
}

}  // namespace

BetaFit solve_beta(const Sample& sample, const ModelSpec& spec, const MomentProvider& provider,
                   const SolverOptions& opts) {
  const int d = spec.h.dim();
  if (opts.init.size() && opts.init.size() != d)
    throw ConfigError("initial tilt value has wrong dimension");
  ScoreEngine engine(sample, spec, provider);
  BetaFit fit = (d == 1) ? solve_scalar(engine, opts) : solve_newton(engine, d, opts);
  fit.provider = provider.kind();
  if (opts.with_se) {
    const SandwichResult sw = beta_sandwich(sample, spec, provider, fit.beta);
    fit.cov = sw.cov;
    fit.se = sw.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  return fit;
}

MatrixXd smoothing_correction(const Sample& sample, const ModelSpec& spec,
                              const NonparametricProvider& provider, const VectorXd& beta_hat) {
  ScoreEngine engine(sample, spec, provider);
  engine.estimating_equation(beta_hat);  // populate the cache
  const int n = sample.size();
  const int d = static_cast<int>(beta_hat.size());
  MatrixXd k = MatrixXd::Zero(n, d);
  for (int i = 0; i < n; ++i) {
    const auto& o = sample.obs[i];
    if (o.r != 1) continue;
    const DeltaTriple& dt = engine.delta(i, beta_hat);
    const double ds = engine.d_star(i, beta_hat);
    const double eg_star = engine.e_gstar(i);
    // Smoothed response rate gives the estimated covariate shift via
    // 1/E(R|x) - 1 = e^{-g(u)} d1(x).
    const double rate = provider.response_rate(o.x);
    if (!(rate > 0.0) || !(rate < 1.0 + 1e-12))
      throw DegenerateConditional("smoothed response rate left (0,1]");
    const double eg_hat = (1.0 / rate - 1.0) / dt.d1;
    const double e1 = std::exp(-spec.h.value(o.y(), beta_hat));
    const double e2 = e1 * e1;
    const VectorXd gx = (engine.a_star(i, beta_hat) * dt.d1 - dt.d3) / ds;
    const double tail = 2.0 * dt.d1 - e1 - dt.d1 * (e1 + eg_star * e2) / ds;
    k.row(i) = ((eg_hat - eg_star) * tail) * gx.transpose();
  }
  return k;
}

SandwichResult beta_sandwich(const Sample& sample, const ModelSpec& spec,
                             const MomentProvider& provider, const VectorXd& beta_hat) {
  const int n = sample.size();
  const int d = static_cast<int>(beta_hat.size());
  ScoreEngine engine(sample, spec, provider);

  SandwichResult out;
  out.psi = engine.all_scores(beta_hat);

  // Bread: mean derivative of the score in the tilt parameter.
  const VectorXd base = engine.estimating_equation(beta_hat);
  out.bread.resize(d, d);
  for (int j = 0; j < d; ++j) {
    const double step = 1e-5 * (1.0 + std::abs(beta_hat[j]));
    VectorXd shifted = beta_hat;
    shifted[j] += step;
    out.bread.col(j) = (engine.estimating_equation(shifted) - base) / (step * n);
  }

  if (provider.kind() == ProviderKind::parametric) {
    // First-stage correction: difference quotients of the mean score against
    // each fitted nuisance coordinate, times that coordinate's influence.
    const auto& par = dynamic_cast<const ParametricProvider&>(provider);
    const VectorXd eta = par.nuisance();
    const int m = static_cast<int>(eta.size());
    MatrixXd dscore(d, m);
    const VectorXd mean_base = engine.estimating_equation(beta_hat) / n;
    for (int c = 0; c < m; ++c) {
      const double step = 1e-5 * (1.0 + std::abs(eta[c]));
      const auto shifted = par.perturbed(c, step);
      ScoreEngine se2(sample, spec, *shifted);
      dscore.col(c) = (se2.estimating_equation(beta_hat) / n - mean_base) / step;
    }
    for (int i = 0; i < n; ++i) {
      out.psi.row(i) += (dscore * par.nuisance_influence(i)).transpose();
    }
  } else if (provider.kind() == ProviderKind::nonparametric) {
    const auto& np = dynamic_cast<const NonparametricProvider&>(provider);
    out.psi += smoothing_correction(sample, spec, np, beta_hat);
  }

  out.meat = (out.psi.transpose() * out.psi) / static_cast<double>(n);
  Eigen::FullPivLU<MatrixXd> lu(out.bread);
  if (!lu.isInvertible()) throw SingularJacobian("sandwich bread matrix is singular");
  const MatrixXd binv = lu.inverse();
  out.cov = binv * out.meat * binv.transpose() / static_cast<double>(n);
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

}  // namespace nmar
