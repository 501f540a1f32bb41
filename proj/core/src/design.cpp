#include "nmar/design.hpp"

#include <cmath>

#include "nmar/numerics.hpp"

namespace nmar {

int Design::basis_dim() const {
  VectorXd u = VectorXd::Zero(dim_u);
  return static_cast<int>(basis_fn(u, z_cats.front()).size());
}

void Design::validate() const {
  if (beta_true.size() < 1) throw ConfigError("design lacks a tilt parameter");
  if (dim_u < 1) throw ConfigError("design needs at least one propensity covariate");
  if (z_cats.empty() || z_cats.size() != z_probs.size())
    throw ConfigError("design instrument categories and probabilities disagree");
  double total = 0.0;
  for (double p : z_probs) {
    if (p < 0.0) throw ConfigError("negative instrument probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("instrument probabilities do not sum to one");
  if (!(sigma2 > 0.0)) throw ConfigError("respondent outcome variance must be positive");
  if (!mean_fn || !basis_fn) throw ConfigError("design lacks mean or basis");
}

Design design_A() {
  Design d;
  d.id = "A";
  d.beta_true = VectorXd::Constant(1, -0.2);
  d.sigma2 = 1.0;
  d.dim_u = 1;
  d.z_cats = {-1.0, 1.0};
  d.z_probs = {0.5, 0.5};
  d.g_true = GFunction::affine(-0.4, VectorXd::Constant(1, 0.3));
  d.g_star = GFunction::affine(0.0, VectorXd::Constant(1, -0.4));
  d.mean_fn = [](const VectorXd& u, double z) { return (u[0] - z) * (u[0] - z); };
  d.basis_fn = [](const VectorXd& u, double z) {
    VectorXd b(2);
    b << 1.0, (u[0] - z) * (u[0] - z);
    return b;
  };
  return d;
}

Design design_B1() {
  Design d = design_A();
  d.id = "B1";
  d.beta_true = VectorXd::Constant(1, -0.1);
  d.g_true = GFunction::quadratic(-0.2, VectorXd::Zero(1), VectorXd::Constant(1, 0.3));
  d.g_star = GFunction::affine(0.0, VectorXd::Constant(1, -0.4));
  return d;
}

Design design_B2() {
  Design d;
  d.id = "B2";
  d.beta_true = VectorXd::Constant(1, -0.1);
  d.sigma2 = 1.0;
  d.dim_u = 2;
  d.z_cats = {1.0, 2.0};
  d.z_probs = {0.5, 0.5};
  {
    VectorXd quad(2);
    quad << 0.2, 0.2;
    d.g_true = GFunction::quadratic(-0.8, VectorXd::Zero(2), quad);
  }
  {
    VectorXd lin(2);
    lin << -0.4, -0.6;
    d.g_star = GFunction::affine(0.0, lin);
  }
  d.mean_fn = [](const VectorXd& u, double z) {
    return (u[0] - z) * (u[0] - z) + (u[1] - z) * (u[1] - z);
  };
  d.basis_fn = [](const VectorXd& u, double z) {
    VectorXd b(3);
    b << 1.0, (u[0] - z) * (u[0] - z), (u[1] - z) * (u[1] - z);
    return b;
  };
  return d;
}

Design design_by_id(const std::string& id) {
  if (id == "A") return design_A();
  if (id == "B1") return design_B1();
  if (id == "B2") return design_B2();
  throw ConfigError("unknown design '" + id + "'");
}

namespace {

// Response probability marginalized over the outcome: with the respondent law
// N(m, sigma2) and a linear tilt, P(R=1|x) = [1 + e^{-g(u)} E{e^{beta Y}|x,1}]^{-1}.
double response_prob(const Design& d, const VectorXd& u, double z) {
  const double beta = d.beta_true[0];
  const double m = d.outcome_mean(u, z);
  const double tilt = std::exp(beta * m + 0.5 * beta * beta * d.sigma2);
  return 1.0 / (1.0 + std::exp(-d.g_true(u)) * tilt);
}

// Tensor quadrature of f(u, z) against the design's covariate law.
double covariate_expect(const Design& d,
                        const std::function<double(const VectorXd&, double)>& f) {
  const GaussHermite gh = gauss_hermite(80);
  double total = 0.0;
  for (std::size_t kz = 0; kz < d.z_cats.size(); ++kz) {
    const double z = d.z_cats[kz];
    double ez = 0.0;
    if (d.dim_u == 1) {
      VectorXd u(1);
      for (int i = 0; i < gh.nodes.size(); ++i) {
        u[0] = z + gh.nodes[i];
        ez += gh.weights[i] * f(u, z);
      }
    } else if (d.dim_u == 2) {
      VectorXd u(2);
      for (int i = 0; i < gh.nodes.size(); ++i) {
        for (int j = 0; j < gh.nodes.size(); ++j) {
          u[0] = z + gh.nodes[i];
          u[1] = z + gh.nodes[j];
          ez += gh.weights[i] * gh.weights[j] * f(u, z);
        }
      }
    } else {
      throw ConfigError("quadrature supports at most two propensity covariates");
    }
    total += d.z_probs[kz] * ez;
  }
  return total;
}

}  // namespace

double theta_truth(const Design& d) {
  d.validate();
  // E[Y] = E[m(X)] + beta * sigma2 * P(R = 0): nonrespondents carry the
  // exponentially tilted outcome law, which shifts a Gaussian mean by
  // beta * sigma2.
  const double mean_part = covariate_expect(d, [&](const VectorXd& u, double z) {
    return d.outcome_mean(u, z);
  });
  return mean_part + d.beta_true[0] * d.sigma2 * missing_rate_truth(d);
}

double missing_rate_truth(const Design& d) {
  d.validate();
  return covariate_expect(d, [&](const VectorXd& u, double z) {
    return 1.0 - response_prob(d, u, z);
  });
}

std::vector<GFunction> gstar_choices(const Design& d) {
  return {d.g_true, d.g_star, GFunction::zero(d.dim_u)};
}

}  // namespace nmar
