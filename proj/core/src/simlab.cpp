#include "nmar/simlab.hpp"

#include <cmath>
#include <limits>
#include <memory>

#include "nmar/numerics.hpp"
#include "nmar/rng.hpp"

namespace nmar {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

SimSample generate(const Design& design, int n, std::uint64_t seed) {
  design.validate();
  if (n < 1) throw ConfigError("sample size must be positive");
  const double beta = design.beta_true[0];
  const double sd = std::sqrt(design.sigma2);
  const HFamily h = HFamily::linear();

  SimSample sim;
  sim.sample.u_cols.resize(design.dim_u);
  for (int j = 0; j < design.dim_u; ++j) sim.sample.u_cols[j] = j;
  sim.sample.z_cols = {design.dim_u};
  sim.sample.obs.reserve(n);
  sim.latent_y.resize(n);

  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int k = rng.categorical(design.z_probs);
    const double z = design.z_cats[k];
    VectorXd u(design.dim_u);
    for (int j = 0; j < design.dim_u; ++j) u[j] = z + rng.normal();
    const double m = design.outcome_mean(u, z);
    // Mixture weight equal to the marginal response probability at x: the
    // respondent side keeps the law N(m, sigma2), the nonrespondent side is
    // its exponential tilt, a mean shift of beta * sigma2.
    const double tilt = std::exp(beta * m + 0.5 * beta * beta * design.sigma2);
    const double w = 1.0 / (1.0 + std::exp(-design.g_true(u)) * tilt);
    const double mu = (rng.uniform() < w) ? m : m + beta * design.sigma2;
    const double y = mu + sd * rng.normal();
    const int r = rng.bernoulli(propensity(h, design.g_true, y, u, design.beta_true)) ? 1 : 0;

    Observation o;
    o.x.resize(design.dim_u + 1);
    o.x.head(design.dim_u) = u;
    o.x[design.dim_u] = z;
    o.r = r;
    o.y_raw = y;
    sim.sample.obs.push_back(std::move(o));
    sim.latent_y[i] = y;
  }
  return sim;
}

double naive_estimator(const Sample& sample) {
  sample.validate();
  double acc = 0.0;
  int n1 = 0;
  for (const auto& o : sample.obs) {
    if (o.r == 1) {
      acc += o.y();
      ++n1;
    }
  }
  return acc / static_cast<double>(n1);
}

double oracle_estimator(const SimSample& sim) {
  if (sim.latent_y.size() != sim.sample.size() || sim.latent_y.size() == 0)
    throw OracleUnavailable("latent outcomes are only known inside the simulator");
  return sim.latent_y.mean();
}

std::string estimator_label(EstimatorId id) {
  switch (id) {
    case EstimatorId::beta_working: return "beta_working";
    case EstimatorId::theta_working: return "theta_working";
    case EstimatorId::oracle_mean: return "oracle_mean";
    case EstimatorId::naive_mean: return "naive_mean";
  }
  throw ConfigError("unknown estimator id");
}

EstimatorId estimator_by_label(const std::string& label) {
  if (label == "beta_working") return EstimatorId::beta_working;
  if (label == "theta_working") return EstimatorId::theta_working;
  if (label == "oracle_mean") return EstimatorId::oracle_mean;
  if (label == "naive_mean") return EstimatorId::naive_mean;
  throw ConfigError("unknown estimator '" + label + "'");
}

MetricsRow aggregate_metrics(const std::string& label, double truth,
                             const std::vector<double>& estimates,
                             const std::vector<double>& std_errors, int n_failures) {
  if (estimates.size() != std_errors.size())
    throw ConfigError("estimates and standard errors differ in length");
  MetricsRow row;
  row.label = label;
  row.truth = truth;
  row.n_failures = n_failures;
  row.n_replicates = static_cast<int>(estimates.size()) + n_failures;
  if (estimates.empty()) {
    row.bias = row.sd = row.rmse = row.se = row.cvp = kNan;
    row.flagged = true;
    return row;
  }
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= static_cast<double>(estimates.size());
  row.bias = mean - truth;
  row.sd = sample_sd(estimates);
  double mse = 0.0;
  for (double e : estimates) mse += (e - truth) * (e - truth);
  row.rmse = std::sqrt(mse / static_cast<double>(estimates.size()));

  double se_sum = 0.0;
  int covered = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double s = std_errors[i];
    if (!std::isfinite(s)) continue;
    ++row.n_se;
    se_sum += s;
    if (std::abs(estimates[i] - truth) <= 1.96 * s) ++covered;
  }
  row.se = row.n_se > 0 ? se_sum / row.n_se : kNan;
  row.cvp = row.n_se > 0 ? 100.0 * covered / row.n_se : kNan;
  row.flagged = 20 * n_failures > row.n_replicates;  // more than 5%
  return row;
}

namespace {

struct Slots {
  std::vector<double> est;
  std::vector<double> se;
  std::vector<char> failed;
  explicit Slots(int r)
      : est(r, kNan), se(r, kNan), failed(r, 0) {}
};

std::unique_ptr<MomentProvider> make_provider(ProviderKind kind, const Design& design,
                                              const Sample& sample, const ModelSpec& spec,
                                              const KernelSpec& kx, const KernelSpec& ku) {
  switch (kind) {
    case ProviderKind::oracle:
      return std::make_unique<OracleProvider>(design, spec);
    case ProviderKind::parametric: {
      const int q = design.dim_u;
      auto basis = [&design, q](const VectorXd& x) {
        return design.basis(x.head(q), x[q]);
      };
      // Simulations grant the fitted posterior the true covariate shift.
      return std::make_unique<ParametricProvider>(sample, spec, basis, design.g_true);
    }
    case ProviderKind::nonparametric:
      return std::make_unique<NonparametricProvider>(sample, spec, kx, ku);
  }
  throw ConfigError("unknown provider kind");
}

}  // namespace

std::vector<MetricsRow> run_monte_carlo(const Design& design, int n, int replicates,
                                        const std::vector<EstimatorId>& roster,
                                        std::uint64_t master_seed, const McOptions& opts) {
  design.validate();
  if (replicates < 1) throw ConfigError("replicate count must be positive");
  if (roster.empty()) throw ConfigError("no estimators requested");
  if (opts.gstar.dim() != design.dim_u)
    throw ConfigError("working shift dimension does not match the design");

  bool want_beta = false, want_theta = false, want_oracle = false, want_naive = false;
  for (EstimatorId id : roster) {
    want_beta |= id == EstimatorId::beta_working;
    want_theta |= id == EstimatorId::theta_working;
    want_oracle |= id == EstimatorId::oracle_mean;
    want_naive |= id == EstimatorId::naive_mean;
  }

  const double beta_truth = design.beta_true[0];
  const double mean_truth =
      (want_theta || want_oracle || want_naive) ? theta_truth(design) : 0.0;

  Slots s_beta(replicates), s_theta(replicates), s_oracle(replicates), s_naive(replicates);

  for (int k = 0; k < replicates; ++k) {
    const SimSample sim = generate(design, n, mix_seed(master_seed, k));
    const Sample& sample = sim.sample;

    if (want_oracle) {
      s_oracle.est[k] = oracle_estimator(sim);
      const std::vector<double> latent(sim.latent_y.data(),
                                       sim.latent_y.data() + sim.latent_y.size());
      s_oracle.se[k] = sample_sd(latent) / std::sqrt(static_cast<double>(n));
    }
    if (want_naive) {
      std::vector<double> resp;
      for (const auto& o : sample.obs) {
        if (o.r == 1) resp.push_back(o.y());
      }
      s_naive.est[k] = naive_estimator(sample);
      s_naive.se[k] = sample_sd(resp) / std::sqrt(static_cast<double>(resp.size()));
    }
    if (!want_beta && !want_theta) continue;

    const ModelSpec spec{HFamily::linear(), opts.gstar};
    BetaFit fit;
    std::unique_ptr<MomentProvider> provider;
    try {
      provider = make_provider(opts.provider, design, sample, spec, opts.kernel_x, opts.kernel_u);
      SolverOptions sopts = opts.solver;
      sopts.with_se = want_beta;
      fit = solve_beta(sample, spec, *provider, sopts);
    } catch (const NumericalError&) {
      if (want_beta) s_beta.failed[k] = 1;
      if (want_theta) s_theta.failed[k] = 1;
      continue;
    }
    if (want_beta) {
      s_beta.est[k] = fit.beta[0];
      s_beta.se[k] = fit.se.size() ? fit.se[0] : kNan;
    }
    if (!want_theta) continue;

    try {
      // The imputation stage may smooth with its own kernel.
      std::unique_ptr<MomentProvider> theta_provider_holder;
      const MomentProvider* theta_provider = provider.get();
      if (opts.provider == ProviderKind::nonparametric &&
          opts.kernel_theta.to_string() != opts.kernel_x.to_string()) {
        theta_provider_holder = make_provider(opts.provider, design, sample, spec,
                                              opts.kernel_theta, opts.kernel_u);
        theta_provider = theta_provider_holder.get();
      }
      const double th = estimate_theta_mean(sample, spec, *theta_provider, fit.beta);
      s_theta.est[k] = th;

      const bool want_se = opts.theta_se != ThetaSeMethod::none &&
                           (opts.se_subset < 0 || k < opts.se_subset);
      if (want_se && opts.theta_se == ThetaSeMethod::bootstrap) {
        auto closure = [&](const Sample& res) {
          auto prov = make_provider(opts.provider, design, res, spec, opts.kernel_x,
                                    opts.kernel_u);
          SolverOptions sopts = opts.solver;
          sopts.with_se = false;
          const BetaFit bfit = solve_beta(res, spec, *prov, sopts);
          std::unique_ptr<MomentProvider> tp_holder;
          const MomentProvider* tp = prov.get();
          if (opts.provider == ProviderKind::nonparametric &&
              opts.kernel_theta.to_string() != opts.kernel_x.to_string()) {
            tp_holder = make_provider(opts.provider, design, res, spec, opts.kernel_theta,
                                      opts.kernel_u);
            tp = tp_holder.get();
          }
          return VectorXd::Constant(1, estimate_theta_mean(res, spec, *tp, bfit.beta)).eval();
        };
        const VectorXd se = bootstrap_se(sample, closure, opts.bootstrap_resamples,
                                         mix_seed(master_seed, k, 0xB00757ULL));
        s_theta.se[k] = se[0];
      } else if (want_se && opts.theta_se == ThetaSeMethod::influence) {
        VectorXd theta_v = VectorXd::Constant(1, th);
        auto zeta = [](const VectorXd&, double y, const VectorXd& t) {
          return VectorXd::Constant(1, y - t[0]).eval();
        };
        const MatrixXd cov = theta_influence_variance(sample, spec, *theta_provider, fit.beta,
                                                      theta_v, zeta, nullptr, provider.get());
        s_theta.se[k] = std::sqrt(std::max(cov(0, 0), 0.0));
      }
    } catch (const NumericalError&) {
      s_theta.failed[k] = 1;
    }
  }

  auto collect = [&](const Slots& s, const std::string& label, double truth) {
    std::vector<double> est, se;
    int failures = 0;
    for (int k = 0; k < replicates; ++k) {
      if (s.failed[k]) {
        ++failures;
        continue;
      }
      est.push_back(s.est[k]);
      se.push_back(s.se[k]);
    }
    return aggregate_metrics(label, truth, est, se, failures);
  };

  std::vector<MetricsRow> rows;
  for (EstimatorId id : roster) {
    switch (id) {
      case EstimatorId::beta_working:
        rows.push_back(collect(s_beta, estimator_label(id), beta_truth));
        break;
      case EstimatorId::theta_working:
        rows.push_back(collect(s_theta, estimator_label(id), mean_truth));
        break;
      case EstimatorId::oracle_mean:
        rows.push_back(collect(s_oracle, estimator_label(id), mean_truth));
        break;
      case EstimatorId::naive_mean:
        rows.push_back(collect(s_naive, estimator_label(id), mean_truth));
        break;
    }
  }
  return rows;
}

}  // namespace nmar
