#include "nmar/run.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace nmar {

namespace {

std::vector<double> parse_coeff_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& tok : split_list(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse coefficient '" + tok + "' in shift specification");
    }
  }
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
}

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

GFunction parse_gstar(const std::string& text, int dim_u, const Design* design) {
  if (text == "zero") return GFunction::zero(dim_u);
  if (text == "true") {
    if (!design) throw ConfigError("the true shift is only known for simulated designs");
    return design->g_true;
  }
  if (text == "working") {
    if (!design) throw ConfigError("the named working shift is only defined for simulated designs");
    return design->g_star;
  }
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ConfigError("unknown shift specification '" + text + "'");
  const std::string head = text.substr(0, colon);
  const std::vector<double> c = parse_coeff_list(text.substr(colon + 1));
  if (head == "affine") {
    if (static_cast<int>(c.size()) != 1 + dim_u)
      throw ConfigError("affine shift needs 1 + " + std::to_string(dim_u) + " coefficients");
    VectorXd lin(dim_u);
    for (int j = 0; j < dim_u; ++j) lin[j] = c[1 + j];
    return GFunction::affine(c[0], lin);
  }
  if (head == "quad") {
    if (static_cast<int>(c.size()) != 1 + 2 * dim_u)
      throw ConfigError("quad shift needs 1 + " + std::to_string(2 * dim_u) + " coefficients");
    VectorXd lin(dim_u), quad(dim_u);
    for (int j = 0; j < dim_u; ++j) {
      lin[j] = c[1 + j];
      quad[j] = c[1 + dim_u + j];
    }
    return GFunction::quadratic(c[0], lin, quad);
  }
  throw ConfigError("unknown shift specification '" + text + "'");
}

SimulateOutcome run_simulate(const RunConfig& cfg) {
  cfg.validate();
  const Design design = design_by_id(cfg.design);

  McOptions opts;
  opts.provider = provider_by_name(cfg.provider);
  opts.gstar = parse_gstar(cfg.gstar, design.dim_u, &design);
  opts.kernel_x = KernelSpec::parse(cfg.kernel);
  opts.kernel_u = KernelSpec::parse(cfg.kernel_outer.empty() ? cfg.kernel : cfg.kernel_outer);
  opts.kernel_theta = KernelSpec::parse(cfg.theta_kernel.empty() ? cfg.kernel : cfg.theta_kernel);
  opts.bootstrap_resamples = cfg.bootstrap;
  opts.se_subset = cfg.se_subset;
  if (cfg.theta_se == "bootstrap") opts.theta_se = ThetaSeMethod::bootstrap;
  else if (cfg.theta_se == "influence") opts.theta_se = ThetaSeMethod::influence;
  else opts.theta_se = ThetaSeMethod::none;
  opts.solver.init = VectorXd::Constant(1, cfg.init);
  opts.solver.tol_residual = cfg.tol_residual;
  opts.solver.tol_step = cfg.tol_step;
  opts.solver.max_iter = cfg.max_iter;

  std::vector<EstimatorId> roster;
  if (cfg.estimators.empty()) {
    if (design.id == "A") {
      roster = {EstimatorId::beta_working};
    } else {
      roster = {EstimatorId::theta_working, EstimatorId::naive_mean, EstimatorId::oracle_mean};
    }
  } else {
    for (const auto& name : split_list(cfg.estimators)) roster.push_back(estimator_by_label(name));
  }

  SimulateOutcome out;
  out.rows = run_monte_carlo(design, cfg.n, cfg.replicates, roster, cfg.seed, opts);
  out.text_table = metrics_text_string(out.rows);
  out.csv_text = metrics_csv_string(out.rows);
  if (!cfg.out.empty()) {
    const bool csv = cfg.format == "csv" || (cfg.format == "auto" && ends_with(cfg.out, ".csv"));
    write_file(cfg.out, csv ? out.csv_text : out.text_table);
  }
  return out;
}

EstimateOutcome run_estimate(const RunConfig& cfg) {
  cfg.validate();
  ColumnMapping mapping{cfg.ycol, cfg.rcol, cfg.ucols, cfg.zcols};
  LoadedSample loaded = load_sample_csv(cfg.input, mapping);
  const Sample& sample = loaded.sample;
  const int dim_u = sample.dim_u();

  ModelSpec spec;
  spec.h = HFamily::linear();
  spec.gstar = parse_gstar(cfg.gstar, dim_u, nullptr);

  const ProviderKind kind = provider_by_name(cfg.provider);
  std::unique_ptr<MomentProvider> provider;
  if (kind == ProviderKind::oracle) {
    throw OracleUnavailable("oracle moments need the generating law; use a simulated design");
  } else if (kind == ProviderKind::parametric) {
    const int p = static_cast<int>(sample.obs.front().x.size());
    auto basis = [p](const VectorXd& x) {
      VectorXd b(p + 1);
      b[0] = 1.0;
      b.tail(p) = x;
      return b;
    };
    // Without the generating law, the posterior reweighting falls back to the
    // working shift itself.
    provider = std::make_unique<ParametricProvider>(sample, spec, basis, spec.gstar);
  } else {
    const KernelSpec kx = KernelSpec::parse(cfg.kernel);
    const KernelSpec ku =
        KernelSpec::parse(cfg.kernel_outer.empty() ? cfg.kernel : cfg.kernel_outer);
    provider = std::make_unique<NonparametricProvider>(sample, spec, kx, ku);
  }

  SolverOptions sopts;
  sopts.init = VectorXd::Constant(1, cfg.init);
  sopts.tol_residual = cfg.tol_residual;
  sopts.tol_step = cfg.tol_step;
  sopts.max_iter = cfg.max_iter;

  EstimateOutcome out;
  out.stats = loaded.stats;
  out.fit = solve_beta(sample, spec, *provider, sopts);
  out.theta = estimate_theta_mean(sample, spec, *provider, out.fit.beta);

  if (cfg.bootstrap > 0) {
    auto closure = [&](const Sample& res) {
      std::unique_ptr<MomentProvider> prov;
      if (kind == ProviderKind::parametric) {
        const int p = static_cast<int>(res.obs.front().x.size());
        auto basis = [p](const VectorXd& x) {
          VectorXd b(p + 1);
          b[0] = 1.0;
          b.tail(p) = x;
          return b;
        };
        prov = std::make_unique<ParametricProvider>(res, spec, basis, spec.gstar);
      } else {
        const KernelSpec kx = KernelSpec::parse(cfg.kernel);
        const KernelSpec ku =
            KernelSpec::parse(cfg.kernel_outer.empty() ? cfg.kernel : cfg.kernel_outer);
        prov = std::make_unique<NonparametricProvider>(res, spec, kx, ku);
      }
      SolverOptions so = sopts;
      so.with_se = false;
      const BetaFit bf = solve_beta(res, spec, *prov, so);
      return VectorXd::Constant(1, estimate_theta_mean(res, spec, *prov, bf.beta)).eval();
    };
    out.theta_se = bootstrap_se(sample, closure, cfg.bootstrap, cfg.seed)[0];
    out.theta_se_method = "bootstrap";
  } else {
    VectorXd theta_v = VectorXd::Constant(1, out.theta);
    auto zeta = [](const VectorXd&, double y, const VectorXd& t) {
      return VectorXd::Constant(1, y - t[0]).eval();
    };
    const MatrixXd cov =
        theta_influence_variance(sample, spec, *provider, out.fit.beta, theta_v, zeta);
    out.theta_se = std::sqrt(std::max(cov(0, 0), 0.0));
    out.theta_se_method = "influence";
  }

  std::ostringstream text;
  text << "rows_loaded = " << out.stats.n_rows << '\n'
       << "respondents = " << out.stats.n_respondents << '\n'
       << "missing = " << out.stats.n_missing << '\n'
       << "provider = " << provider_name(kind) << '\n'
       << "beta = " << fmt_full(out.fit.beta[0]) << '\n'
       << "beta_se = " << fmt_full(out.fit.se.size() ? out.fit.se[0] : 0.0) << '\n'
       << "theta = " << fmt_full(out.theta) << '\n'
       << "theta_se = " << fmt_full(out.theta_se) << '\n'
       << "theta_se_method = " << out.theta_se_method << '\n'
       << "iterations = " << out.fit.iterations << '\n'
       << "converged = " << (out.fit.converged ? 1 : 0) << '\n';
  out.text = text.str();

  std::ostringstream csv;
  csv << "beta,beta_se,theta,theta_se,theta_se_method,n_rows,n_respondents,n_missing,iterations,"
         "converged\n"
      << fmt_full(out.fit.beta[0]) << ',' << fmt_full(out.fit.se.size() ? out.fit.se[0] : 0.0)
      << ',' << fmt_full(out.theta) << ',' << fmt_full(out.theta_se) << ','
      << out.theta_se_method << ',' << out.stats.n_rows << ',' << out.stats.n_respondents << ','
      << out.stats.n_missing << ',' << out.fit.iterations << ','
      << (out.fit.converged ? 1 : 0) << '\n';
  out.csv_text = csv.str();

  if (!cfg.out.empty()) {
    const bool as_csv = cfg.format == "csv" || (cfg.format == "auto" && ends_with(cfg.out, ".csv"));
    write_file(cfg.out, as_csv ? out.csv_text : out.text);
  }
  return out;
}

}  // namespace nmar
