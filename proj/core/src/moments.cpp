#include "nmar/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "nmar/numerics.hpp"

namespace nmar {

namespace {

constexpr int kQuadNodes = 64;
constexpr int kMaxCategories = 64;

const GaussHermite& quad_table() {
  static const GaussHermite gh = gauss_hermite(kQuadNodes);
  return gh;
}

double normal_pdf(double x, double mean, double var) {
  if (!(var > 0.0)) throw DegenerateConditional("non-positive covariate variance in posterior");
  const double t = x - mean;
  return std::exp(-0.5 * t * t / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Closed-form tilt moments for the linear family against N(m, s2):
// E e^{bY} = exp(bm + b^2 s2 / 2), and the gradient term carries -Y.
DeltaTriple gaussian_linear_delta(double m, double s2, double beta) {
  DeltaTriple t;
  t.d1 = std::exp(beta * m + 0.5 * beta * beta * s2);
  t.d2 = std::exp(2.0 * beta * m + 2.0 * beta * beta * s2);
  t.d3 = VectorXd::Constant(1, -(m + beta * s2) * t.d1);
  return t;
}

// Quadrature fallback for a custom tilt family against N(m, s2).
DeltaTriple gaussian_custom_delta(double m, double s2, const HFamily& h, const VectorXd& beta) {
  const auto& gh = quad_table();
  const double sd = std::sqrt(s2);
  DeltaTriple t;
  t.d3 = VectorXd::Zero(beta.size());
  for (int i = 0; i < gh.nodes.size(); ++i) {
    const double y = m + sd * gh.nodes[i];
    const double e1 = std::exp(-h.value(y, beta));
    t.d1 += gh.weights[i] * e1;
    t.d2 += gh.weights[i] * e1 * e1;
    t.d3 += gh.weights[i] * e1 * h.grad(y, beta);
  }
  return t;
}

DeltaTriple gaussian_delta(double m, double s2, const HFamily& h, const VectorXd& beta) {
  if (h.is_linear()) return gaussian_linear_delta(m, s2, beta[0]);
  return gaussian_custom_delta(m, s2, h, beta);
}

// Tilted conditional expectation of f(Y) against N(m, s2): for the linear
// family the tilt just shifts the mean by beta * s2.
double gaussian_tilted_ratio(double m, double s2, const HFamily& h, const VectorXd& beta,
                             const std::function<double(double)>& f) {
  const auto& gh = quad_table();
  const double sd = std::sqrt(s2);
  if (h.is_linear()) {
    const double shifted = m + beta[0] * s2;
    double acc = 0.0;
    for (int i = 0; i < gh.nodes.size(); ++i) acc += gh.weights[i] * f(shifted + sd * gh.nodes[i]);
    return acc;
  }
  double num = 0.0;
  double den = 0.0;
  for (int i = 0; i < gh.nodes.size(); ++i) {
    const double y = m + sd * gh.nodes[i];
    const double e1 = std::exp(-h.value(y, beta));
    num += gh.weights[i] * f(y) * e1;
    den += gh.weights[i] * e1;
  }
  if (!(den > 0.0)) throw DegenerateConditional("tilted expectation lost its denominator");
  return num / den;
}

}  // namespace

std::string provider_name(ProviderKind k) {
  switch (k) {
    case ProviderKind::oracle: return "oracle";
    case ProviderKind::parametric: return "parametric";
    case ProviderKind::nonparametric: return "nonparametric";
  }
  throw ConfigError("unknown provider kind");
}

ProviderKind provider_by_name(const std::string& name) {
  if (name == "oracle") return ProviderKind::oracle;
  if (name == "parametric") return ProviderKind::parametric;
  if (name == "nonparametric") return ProviderKind::nonparametric;
  throw ConfigError("unknown provider '" + name + "'");
}

double MomentProvider::tilted_mean(const VectorXd& x, const VectorXd& beta) const {
  return tilted_ratio(x, beta, [](double y) { return y; });
}

// ---------------------------------------------------------------------------
// OracleProvider

OracleProvider::OracleProvider(const Design& design, ModelSpec spec)
    : design_(design), spec_(std::move(spec)) {
  design_.validate();
  if (design_.z_cats.size() > 1 && design_.dim_u < 1)
    throw ConfigError("oracle needs the propensity covariate block");
}

DeltaTriple OracleProvider::inner_moments(const VectorXd& x, const VectorXd& beta) const {
  // Simulated covariates are laid out as [u..., z].
  const VectorXd u = x.head(design_.dim_u);
  const double z = x[design_.dim_u];
  return gaussian_delta(design_.outcome_mean(u, z), design_.sigma2, spec_.h, beta);
}

VectorXd OracleProvider::outer_expect(const VectorXd& u, const VectorXd& beta, int out_dim,
                                      const OuterIntegrand& integrand) const {
  // Posterior over the instrument given u among respondents: prior category
  // mass times the Gaussian covariate density times the marginal response
  // probability implied by the true shift and the tilt at the queried beta.
  const std::size_t ncat = design_.z_cats.size();
  const double eg = std::exp(-design_.g_true(u));
  std::vector<double> mass(ncat);
  std::vector<VectorXd> points(ncat);
  double total = 0.0;
  for (std::size_t k = 0; k < ncat; ++k) {
    const double z = design_.z_cats[k];
    VectorXd x(design_.dim_u + 1);
    x.head(design_.dim_u) = u;
    x[design_.dim_u] = z;
    points[k] = x;
    double dens = 1.0;
    for (int j = 0; j < design_.dim_u; ++j) dens *= normal_pdf(u[j], z, 1.0);
    const double resp = 1.0 / (1.0 + eg * inner_moments(x, beta).d1);
    mass[k] = design_.z_probs[k] * dens * resp;
    total += mass[k];
  }
  if (!(total > 0.0)) throw DegenerateConditional("instrument posterior has no mass");
  VectorXd out = VectorXd::Zero(out_dim);
  for (std::size_t k = 0; k < ncat; ++k) {
    if (mass[k] == 0.0) continue;
    out += (mass[k] / total) * integrand(points[k], -1);
  }
  return out;
}

double OracleProvider::tilted_ratio(const VectorXd& x, const VectorXd& beta,
                                    const std::function<double(double)>& f) const {
  const VectorXd u = x.head(design_.dim_u);
  const double z = x[design_.dim_u];
  return gaussian_tilted_ratio(design_.outcome_mean(u, z), design_.sigma2, spec_.h, beta, f);
}

double OracleProvider::tilted_mean(const VectorXd& x, const VectorXd& beta) const {
  if (spec_.h.is_linear()) {
    const VectorXd u = x.head(design_.dim_u);
    const double z = x[design_.dim_u];
    return design_.outcome_mean(u, z) + beta[0] * design_.sigma2;
  }
  return MomentProvider::tilted_mean(x, beta);
}

// ---------------------------------------------------------------------------
// ParametricProvider

ParametricProvider::ParametricProvider(const Sample& sample, ModelSpec spec, BasisFn basis,
                                       GFunction posterior_shift)
    : sample_(&sample),
      spec_(std::move(spec)),
      basis_(std::move(basis)),
      posterior_shift_(std::move(posterior_shift)) {
  if (!basis_) throw ConfigError("parametric provider needs a regression basis");
  fit(sample);
}

void ParametricProvider::fit(const Sample& sample) {
  sample.validate();
  const int n = sample.size();
  const int n1 = sample.n_respondents();
  const int k = static_cast<int>(basis_(sample.obs.front().x).size());
  if (n1 <= k + 1) throw DataError("too few respondents to fit the outcome regression");

  MatrixXd bb = MatrixXd::Zero(k, k);
  VectorXd by = VectorXd::Zero(k);
  for (const auto& o : sample.obs) {
    if (o.r != 1) continue;
    const VectorXd b = basis_(o.x);
    if (b.size() != k) throw DataError("regression basis changes dimension across rows");
    bb.noalias() += b * b.transpose();
    by.noalias() += b * o.y();
  }
  Eigen::FullPivLU<MatrixXd> lu(bb);
  if (!lu.isInvertible()) throw NumericalError("regression basis is collinear on respondents");
  alpha_ = lu.solve(by);

  double ss = 0.0;
  double yy = 0.0;
  for (const auto& o : sample.obs) {
    if (o.r != 1) continue;
    const double e = o.y() - alpha_.dot(basis_(o.x));
    ss += e * e;
    yy += o.y() * o.y();
  }
  sigma2_ = ss / static_cast<double>(n1);
  // A perfectly interpolated outcome leaves rounding dust rather than an
  // exact zero, so the collapse guard is relative to the outcome scale.
  const double y2bar = yy / static_cast<double>(n1);
  if (!(sigma2_ > 1e-12 * (1.0 + y2bar)))
    throw DegenerateConditional("respondent residual variance collapsed");
  resp_rate_ = static_cast<double>(n1) / static_cast<double>(n);
  bread_inv_ = lu.inverse() * static_cast<double>(n);  // inverse of (1/N) sum r b b'

  // Marginal law of (U, Z): category frequencies and per-coordinate Gaussian
  // fits on the full sample, where both blocks are always observed.
  std::map<std::vector<double>, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) {
    const VectorXd z = sample.z_of(sample.obs[i].x);
    std::vector<double> key(z.data(), z.data() + z.size());
    groups[key].push_back(i);
  }
  if (groups.size() > kMaxCategories)
    throw DataError("instrument block does not look categorical (too many distinct values)");
  cats_.clear();
  cat_probs_.clear();
  cat_mean_.clear();
  cat_var_.clear();
  const int q = sample.dim_u();
  for (const auto& [key, rows] : groups) {
    if (rows.size() < 2) throw DataError("instrument category with fewer than two rows");
    VectorXd zv = Eigen::Map<const VectorXd>(key.data(), static_cast<int>(key.size()));
    VectorXd mu = VectorXd::Zero(q);
    for (int i : rows) mu += sample.u_of(sample.obs[i].x);
    mu /= static_cast<double>(rows.size());
    VectorXd var = VectorXd::Zero(q);
    for (int i : rows) {
      const VectorXd du = sample.u_of(sample.obs[i].x) - mu;
      var += du.cwiseProduct(du);
    }
    var /= static_cast<double>(rows.size());
    for (int j = 0; j < q; ++j) {
      if (!(var[j] > 0.0)) throw DegenerateConditional("covariate variance collapsed in a category");
    }
    cats_.push_back(std::move(zv));
    cat_probs_.push_back(static_cast<double>(rows.size()) / static_cast<double>(n));
    cat_mean_.push_back(std::move(mu));
    cat_var_.push_back(std::move(var));
  }
  fitted_ = true;
}

DeltaTriple ParametricProvider::inner_moments(const VectorXd& x, const VectorXd& beta) const {
  if (!fitted_) throw NotFitted("parametric provider queried before fitting");
  return gaussian_delta(alpha_.dot(basis_(x)), sigma2_, spec_.h, beta);
}

VectorXd ParametricProvider::outer_expect(const VectorXd& u, const VectorXd& beta, int out_dim,
                                          const OuterIntegrand& integrand) const {
  if (!fitted_) throw NotFitted("parametric provider queried before fitting");
  const std::size_t ncat = cats_.size();
  const double eg = std::exp(-posterior_shift_(u));
  std::vector<double> mass(ncat);
  std::vector<VectorXd> points(ncat);
  double total = 0.0;
  for (std::size_t k = 0; k < ncat; ++k) {
    const VectorXd x = sample_->assemble_x(u, cats_[k]);
    points[k] = x;
    double dens = 1.0;
    for (int j = 0; j < u.size(); ++j) dens *= normal_pdf(u[j], cat_mean_[k][j], cat_var_[k][j]);
    const double resp = 1.0 / (1.0 + eg * inner_moments(x, beta).d1);
    mass[k] = cat_probs_[k] * dens * resp;
    total += mass[k];
  }
  if (!(total > 0.0)) throw DegenerateConditional("instrument posterior has no mass");
  VectorXd out = VectorXd::Zero(out_dim);
  for (std::size_t k = 0; k < ncat; ++k) {
    if (mass[k] == 0.0) continue;
    out += (mass[k] / total) * integrand(points[k], -1);
  }
  return out;
}

double ParametricProvider::tilted_ratio(const VectorXd& x, const VectorXd& beta,
                                        const std::function<double(double)>& f) const {
  if (!fitted_) throw NotFitted("parametric provider queried before fitting");
  return gaussian_tilted_ratio(alpha_.dot(basis_(x)), sigma2_, spec_.h, beta, f);
}

double ParametricProvider::tilted_mean(const VectorXd& x, const VectorXd& beta) const {
  if (!fitted_) throw NotFitted("parametric provider queried before fitting");
  if (spec_.h.is_linear()) return alpha_.dot(basis_(x)) + beta[0] * sigma2_;
  return MomentProvider::tilted_mean(x, beta);
}

VectorXd ParametricProvider::nuisance() const {
  if (!fitted_) throw NotFitted("parametric provider queried before fitting");
  VectorXd eta(alpha_.size() + 1);
  eta.head(alpha_.size()) = alpha_;
  eta[alpha_.size()] = sigma2_;
  return eta;
}

VectorXd ParametricProvider::nuisance_influence(int i) const {
  if (!fitted_) throw NotFitted("parametric provider queried before fitting");
  const auto& o = sample_->obs.at(i);
  VectorXd phi = VectorXd::Zero(alpha_.size() + 1);
  if (o.r != 1) return phi;
  const VectorXd b = basis_(o.x);
  const double eps = o.y() - alpha_.dot(b);
  phi.head(alpha_.size()) = bread_inv_ * b * eps;
  phi[alpha_.size()] = (eps * eps - sigma2_) / resp_rate_;
  return phi;
}

std::unique_ptr<ParametricProvider> ParametricProvider::perturbed(int coord, double step) const {
  if (!fitted_) throw NotFitted("parametric provider queried before fitting");
  if (coord < 0 || coord > alpha_.size()) throw ConfigError("nuisance coordinate out of range");
  auto clone = std::unique_ptr<ParametricProvider>(new ParametricProvider(*this));
  if (coord < alpha_.size()) {
    clone->alpha_[coord] += step;
  } else {
    clone->sigma2_ += step;
    if (!(clone->sigma2_ > 0.0)) throw DegenerateConditional("perturbed variance non-positive");
  }
  return clone;
}

// ---------------------------------------------------------------------------
// NonparametricProvider

NonparametricProvider::NonparametricProvider(const Sample& sample, ModelSpec spec,
                                             KernelSpec kernel_x, KernelSpec kernel_u)
    : sample_(&sample), spec_(std::move(spec)), kx_(kernel_x), ku_(kernel_u) {
  sample.validate();
  kx_.validate();
  ku_.validate();
  const int n = sample.size();
  bw_x_ = kx_.bandwidth(n);
  bw_u_ = ku_.bandwidth(n);
  for (int i = 0; i < n; ++i) {
    const auto& o = sample.obs[i];
    all_x_.push_back(o.x);
    all_r_.push_back(static_cast<double>(o.r));
    if (o.r == 1) {
      resp_x_.push_back(o.x);
      resp_u_.push_back(sample.u_of(o.x));
      resp_y_.push_back(o.y());
      resp_rows_.push_back(i);
    }
  }
  if (resp_x_.empty()) throw DataError("no respondents to smooth over");
}

DeltaTriple NonparametricProvider::inner_moments(const VectorXd& x, const VectorXd& beta) const {
  double den = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
  VectorXd s3 = VectorXd::Zero(beta.size());
  for (std::size_t j = 0; j < resp_x_.size(); ++j) {
    const double w = product_weight(kx_.family, resp_x_[j], x, bw_x_);
    if (w == 0.0) continue;
    const double e1 = std::exp(-spec_.h.value(resp_y_[j], beta));
    den += w;
    s1 += w * e1;
    s2 += w * e1 * e1;
    s3 += w * e1 * spec_.h.grad(resp_y_[j], beta);
  }
  if (den == 0.0) throw EmptyNeighborhood("no respondent mass near the query point");
  DeltaTriple t;
  t.d1 = s1 / den;
  t.d2 = s2 / den;
  t.d3 = s3 / den;
  return t;
}

VectorXd NonparametricProvider::outer_expect(const VectorXd& u, const VectorXd& /*beta*/,
                                             int out_dim, const OuterIntegrand& integrand) const {
  double den = 0.0;
  VectorXd num = VectorXd::Zero(out_dim);
  for (std::size_t j = 0; j < resp_u_.size(); ++j) {
    const double w = product_weight(ku_.family, resp_u_[j], u, bw_u_);
    if (w == 0.0) continue;
    den += w;
    num += w * integrand(resp_x_[j], resp_rows_[j]);
  }
  if (den == 0.0) throw EmptyNeighborhood("no respondent mass near the query point");
  return num / den;
}

double NonparametricProvider::tilted_ratio(const VectorXd& x, const VectorXd& beta,
                                           const std::function<double(double)>& f) const {
  // Work under a common exponential shift so extreme tilts cannot overflow.
  std::vector<double> weights(resp_x_.size(), 0.0);
  double shift = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t j = 0; j < resp_x_.size(); ++j) {
    const double w = product_weight(kx_.family, resp_x_[j], x, bw_x_);
    weights[j] = w;
    if (w != 0.0) {
      any = true;
      shift = std::max(shift, -spec_.h.value(resp_y_[j], beta));
    }
  }
  if (!any) throw EmptyNeighborhood("no respondent mass near the query point");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < resp_x_.size(); ++j) {
    if (weights[j] == 0.0) continue;
    const double e1 = std::exp(-spec_.h.value(resp_y_[j], beta) - shift);
    num += weights[j] * f(resp_y_[j]) * e1;
    den += weights[j] * e1;
  }
  if (den == 0.0) throw DegenerateConditional("tilted expectation lost its denominator");
  return num / den;
}

double NonparametricProvider::response_rate(const VectorXd& x) const {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < all_x_.size(); ++j) {
    const double w = product_weight(kx_.family, all_x_[j], x, bw_x_);
    num += w * all_r_[j];
    den += w;
  }
  if (den == 0.0) throw EmptyNeighborhood("no sample mass near the query point");
  return num / den;
}

}  // namespace nmar
