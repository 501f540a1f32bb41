#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "nmar/model.hpp"

namespace nmar {

// A fully specified data-generating law for the simulation laboratory:
// discrete instrument Z, Gaussian covariate block U | Z, a respondent
// outcome law N(m(x), sigma2), the true covariate shift g, and the
// deliberately wrong working shift used in the misspecification studies.
struct Design {
  std::string id;
  VectorXd beta_true;
  double sigma2 = 1.0;
  int dim_u = 1;
  std::vector<double> z_cats;
  std::vector<double> z_probs;
  GFunction g_true = GFunction::zero(1);
  GFunction g_star = GFunction::zero(1);
  std::function<double(const VectorXd&, double)> mean_fn;
  std::function<VectorXd(const VectorXd&, double)> basis_fn;

  double outcome_mean(const VectorXd& u, double z) const { return mean_fn(u, z); }
  VectorXd basis(const VectorXd& u, double z) const { return basis_fn(u, z); }
  int basis_dim() const;
  void validate() const;
};

Design design_A();
Design design_B1();
Design design_B2();
Design design_by_id(const std::string& id);

// Population outcome mean E[Y] under the design, by tensor quadrature.
double theta_truth(const Design& d);

// Population nonresponse rate P(R = 0).
double missing_rate_truth(const Design& d);

// The three working shifts exercised by the score diagnostics: the truth,
// the design's wrong working model, and the zero shift.
std::vector<GFunction> gstar_choices(const Design& d);

}  // namespace nmar
