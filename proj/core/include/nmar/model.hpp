#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nmar/errors.hpp"

namespace nmar {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Numerically safe logistic function.
double expit(double t);

// Outcome-side tilt h(y, beta). The built-in linear family is h = -beta*y,
// whose exponential tilt exp(-h) = exp(beta*y) drives every closed-form
// moment below. A custom family supplies its own value and gradient in beta.
class HFamily {
 public:
  using ValueFn = std::function<double(double, const VectorXd&)>;
  using GradFn = std::function<VectorXd(double, const VectorXd&)>;

  static HFamily linear();
  static HFamily custom(int dim, ValueFn value, GradFn grad);

  int dim() const { return dim_; }
  bool is_linear() const { return linear_; }

  double value(double y, const VectorXd& beta) const;
  // Gradient of h in beta at (y, beta); length dim().
  VectorXd grad(double y, const VectorXd& beta) const;

 private:
  HFamily() = default;
  int dim_ = 1;
  bool linear_ = true;
  ValueFn value_;
  GradFn grad_;
};

// Covariate-side shift g(u). Affine and diagonal-quadratic forms cover the
// working models used throughout; custom covers everything else.
class GFunction {
 public:
  using Fn = std::function<double(const VectorXd&)>;

  // g(u) = c0 + lin . u
  static GFunction affine(double c0, VectorXd lin);
  // g(u) = c0 + lin . u + quad . (u cwise^2)
  static GFunction quadratic(double c0, VectorXd lin, VectorXd quad);
  static GFunction zero(int dim);
  static GFunction custom(int dim, Fn fn, std::string label = "custom");

  int dim() const { return dim_; }
  double operator()(const VectorXd& u) const;
  const std::string& label() const { return label_; }

 private:
  GFunction() = default;
  int dim_ = 0;
  bool analytic_ = true;
  double c0_ = 0.0;
  VectorXd lin_, quad_;
  Fn fn_;
  std::string label_;
};

// Response propensity pi(y, u) = expit{ h(y, beta) + g(u) }.
double propensity(const HFamily& h, const GFunction& g, double y, const VectorXd& u,
                  const VectorXd& beta);

// One data row. Covariates x stack the propensity-side block u first and the
// instrument block z after it; y is meaningful only when r == 1.
struct Observation {
  VectorXd x;
  int r = 0;
  double y_raw = 0.0;

  double y() const {
    if (r != 1) throw std::logic_error("outcome accessed on a nonrespondent row");
    return y_raw;
  }
};

// A dataset plus the column split of x into u (enters the propensity) and z
// (excluded from it). Column indices refer to positions inside x.
struct Sample {
  std::vector<Observation> obs;
  std::vector<int> u_cols;
  std::vector<int> z_cols;

  int size() const { return static_cast<int>(obs.size()); }
  int dim_u() const { return static_cast<int>(u_cols.size()); }
  int dim_z() const { return static_cast<int>(z_cols.size()); }
  int n_respondents() const;

  VectorXd u_of(const VectorXd& x) const;
  VectorXd z_of(const VectorXd& x) const;

  // Rebuild a covariate vector from its u and z blocks, placing each at the
  // declared column positions.
  VectorXd assemble_x(const VectorXd& u, const VectorXd& z) const;

  void validate() const;  // throws DataError on structural defects
};

// Everything the estimating machinery needs to know about the model itself:
// the tilt family and the working guess gstar for the covariate shift.
struct ModelSpec {
  HFamily h = HFamily::linear();
  GFunction gstar = GFunction::zero(0);
};

}  // namespace nmar
