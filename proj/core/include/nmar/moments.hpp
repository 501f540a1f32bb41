#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "nmar/design.hpp"
#include "nmar/kernels.hpp"
#include "nmar/model.hpp"

namespace nmar {

// Respondent-conditional moments of the exponential tilt at one covariate
// point: d1 = E{e^{-h(Y,b)} | x, R=1}, d2 = E{e^{-2h} | x, R=1}, and
// d3 = E{ (dh/db) e^{-h} | x, R=1 }.
struct DeltaTriple {
  double d1 = 0.0;
  double d2 = 0.0;
  VectorXd d3;
};

enum class ProviderKind { oracle, parametric, nonparametric };

std::string provider_name(ProviderKind k);
ProviderKind provider_by_name(const std::string& name);

// Supplies every conditional expectation the score machinery needs, hiding
// whether those come from the true law, a fitted working model, or kernel
// smoothing. The outer integrand receives the covariate point and, when that
// point is a dataset row, its row index (otherwise -1) so callers can reuse
// cached per-row quantities.
class MomentProvider {
 public:
  using OuterIntegrand = std::function<VectorXd(const VectorXd& x, int obs_index)>;

  virtual ~MomentProvider() = default;
  virtual ProviderKind kind() const = 0;

  // Moments of the tilt given x among respondents.
  virtual DeltaTriple inner_moments(const VectorXd& x, const VectorXd& beta) const = 0;

  // E{ f(X) | u, R=1 }: expectation of the integrand over the respondent
  // conditional law of X given its propensity-side block u.
  virtual VectorXd outer_expect(const VectorXd& u, const VectorXd& beta, int out_dim,
                                const OuterIntegrand& integrand) const = 0;

  // E{ f(Y) e^{-h} | x, R=1 } / E{ e^{-h} | x, R=1 }: the tilted respondent
  // conditional expectation used for imputation.
  virtual double tilted_ratio(const VectorXd& x, const VectorXd& beta,
                              const std::function<double(double)>& f) const = 0;

  // Fast path for f(y) = y.
  virtual double tilted_mean(const VectorXd& x, const VectorXd& beta) const;
};

// Closed-form moments from the generating design itself; the posterior over
// the instrument inside outer_expect reweights by the response probability
// implied by the true shift and the tilt at the queried parameter.
class OracleProvider final : public MomentProvider {
 public:
  OracleProvider(const Design& design, ModelSpec spec);

  ProviderKind kind() const override { return ProviderKind::oracle; }
  DeltaTriple inner_moments(const VectorXd& x, const VectorXd& beta) const override;
  VectorXd outer_expect(const VectorXd& u, const VectorXd& beta, int out_dim,
                        const OuterIntegrand& integrand) const override;
  double tilted_ratio(const VectorXd& x, const VectorXd& beta,
                      const std::function<double(double)>& f) const override;
  double tilted_mean(const VectorXd& x, const VectorXd& beta) const override;

 private:
  Design design_;
  ModelSpec spec_;
};

// Working-model moments: a linear regression E(Y|x, R=1) = alpha . b(x) with
// Gaussian errors fitted on respondents, plus a fitted marginal law for
// (U, Z) on the full sample feeding the posterior inside outer_expect.
class ParametricProvider final : public MomentProvider {
 public:
  using BasisFn = std::function<VectorXd(const VectorXd& x)>;

  // posterior_shift is the covariate shift used inside the response
  // probability that reweights the instrument posterior; simulations pass
  // the true shift, real-data fits fall back to the working shift.
  ParametricProvider(const Sample& sample, ModelSpec spec, BasisFn basis,
                     GFunction posterior_shift);

  ProviderKind kind() const override { return ProviderKind::parametric; }
  DeltaTriple inner_moments(const VectorXd& x, const VectorXd& beta) const override;
  VectorXd outer_expect(const VectorXd& u, const VectorXd& beta, int out_dim,
                        const OuterIntegrand& integrand) const override;
  double tilted_ratio(const VectorXd& x, const VectorXd& beta,
                      const std::function<double(double)>& f) const override;
  double tilted_mean(const VectorXd& x, const VectorXd& beta) const override;

  // Fitted nuisance: regression coefficients followed by the error variance.
  VectorXd nuisance() const;
  int n_alpha() const { return static_cast<int>(alpha_.size()); }

  // Influence of the fitted nuisance evaluated at row i (zero on
  // nonrespondent rows); ordering matches nuisance().
  VectorXd nuisance_influence(int i) const;

  // Clone with one nuisance coordinate shifted, for difference quotients.
  std::unique_ptr<ParametricProvider> perturbed(int coord, double step) const;

  double fitted_mean(const VectorXd& x) const { return alpha_.dot(basis_(x)); }
  double fitted_variance() const { return sigma2_; }

 private:
  ParametricProvider() = default;
  void fit(const Sample& sample);

  const Sample* sample_ = nullptr;
  ModelSpec spec_;
  BasisFn basis_;
  GFunction posterior_shift_ = GFunction::zero(0);

  VectorXd alpha_;
  double sigma2_ = 0.0;
  // Marginal law of (U, Z) fitted on the full sample.
  std::vector<VectorXd> cats_;
  std::vector<double> cat_probs_;
  std::vector<VectorXd> cat_mean_;
  std::vector<VectorXd> cat_var_;
  // Pieces of the nuisance influence.
  MatrixXd bread_inv_;
  double resp_rate_ = 0.0;
  bool fitted_ = false;
};

// Kernel-smoothed moments: inner expectations smooth the tilt over
// respondents in the full covariate x; outer expectations smooth over
// respondents in the propensity-side block u.
class NonparametricProvider final : public MomentProvider {
 public:
  NonparametricProvider(const Sample& sample, ModelSpec spec, KernelSpec kernel_x,
                        KernelSpec kernel_u);

  ProviderKind kind() const override { return ProviderKind::nonparametric; }
  DeltaTriple inner_moments(const VectorXd& x, const VectorXd& beta) const override;
  VectorXd outer_expect(const VectorXd& u, const VectorXd& beta, int out_dim,
                        const OuterIntegrand& integrand) const override;
  double tilted_ratio(const VectorXd& x, const VectorXd& beta,
                      const std::function<double(double)>& f) const override;

  // Kernel-smoothed response rate E(R | x) over the full sample.
  double response_rate(const VectorXd& x) const;

  double bandwidth_x() const { return bw_x_; }
  double bandwidth_u() const { return bw_u_; }

 private:
  const Sample* sample_ = nullptr;
  ModelSpec spec_;
  KernelSpec kx_, ku_;
  double bw_x_ = 0.0, bw_u_ = 0.0;
  std::vector<VectorXd> resp_x_;
  std::vector<VectorXd> resp_u_;
  std::vector<double> resp_y_;
  std::vector<int> resp_rows_;
  std::vector<VectorXd> all_x_;
  std::vector<double> all_r_;
};

}  // namespace nmar
