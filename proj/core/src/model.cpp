#include "nmar/model.hpp"

#include <cmath>

namespace nmar {

double expit(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

HFamily HFamily::linear() {
  HFamily h;
  h.dim_ = 1;
  h.linear_ = true;
  return h;
}

HFamily HFamily::custom(int dim, ValueFn value, GradFn grad) {
  if (dim < 1) throw ConfigError("tilt family dimension must be positive");
  if (!value || !grad) throw ConfigError("custom tilt family needs value and gradient");
  HFamily h;
  h.dim_ = dim;
  h.linear_ = false;
  h.value_ = std::move(value);
  h.grad_ = std::move(grad);
  return h;
}

double HFamily::value(double y, const VectorXd& beta) const {
  if (beta.size() != dim_) throw ConfigError("tilt parameter has wrong dimension");
  if (linear_) return -beta[0] * y;
  return value_(y, beta);
}

VectorXd HFamily::grad(double y, const VectorXd& beta) const {
  if (beta.size() != dim_) throw ConfigError("tilt parameter has wrong dimension");
  if (linear_) {
    VectorXd g(1);
    g[0] = -y;
    return g;
  }
  VectorXd g = grad_(y, beta);
  if (g.size() != dim_) throw ConfigError("custom tilt gradient has wrong dimension");
  return g;
}

GFunction GFunction::affine(double c0, VectorXd lin) {
  GFunction g;
  g.dim_ = static_cast<int>(lin.size());
  g.analytic_ = true;
  g.c0_ = c0;
  g.lin_ = std::move(lin);
  g.quad_ = VectorXd::Zero(g.dim_);
  g.label_ = "affine";
  return g;
}

GFunction GFunction::quadratic(double c0, VectorXd lin, VectorXd quad) {
  if (lin.size() != quad.size()) throw ConfigError("shift function coefficient lengths disagree");
  GFunction g;
  g.dim_ = static_cast<int>(lin.size());
  g.analytic_ = true;
  g.c0_ = c0;
  g.lin_ = std::move(lin);
  g.quad_ = std::move(quad);
  g.label_ = "quadratic";
  return g;
}

GFunction GFunction::zero(int dim) {
  GFunction g = affine(0.0, VectorXd::Zero(std::max(dim, 0)));
  g.label_ = "zero";
  return g;
}

GFunction GFunction::custom(int dim, Fn fn, std::string label) {
  if (!fn) throw ConfigError("custom shift function is empty");
  GFunction g;
  g.dim_ = dim;
  g.analytic_ = false;
  g.fn_ = std::move(fn);
  g.label_ = std::move(label);
  return g;
}

double GFunction::operator()(const VectorXd& u) const {
  if (u.size() != dim_) throw ConfigError("shift function got a covariate of wrong dimension");
  if (!analytic_) return fn_(u);
  double v = c0_ + lin_.dot(u);
  if (quad_.size() == dim_ && dim_ > 0) v += quad_.dot(u.cwiseProduct(u));
  return v;
}

double propensity(const HFamily& h, const GFunction& g, double y, const VectorXd& u,
                  const VectorXd& beta) {
  return expit(h.value(y, beta) + g(u));
}

int Sample::n_respondents() const {
  int n1 = 0;
  for (const auto& o : obs) n1 += o.r;
  return n1;
}

VectorXd Sample::u_of(const VectorXd& x) const {
  VectorXd u(u_cols.size());
  for (std::size_t k = 0; k < u_cols.size(); ++k) u[static_cast<int>(k)] = x[u_cols[k]];
  return u;
}

VectorXd Sample::z_of(const VectorXd& x) const {
  VectorXd z(z_cols.size());
  for (std::size_t k = 0; k < z_cols.size(); ++k) z[static_cast<int>(k)] = x[z_cols[k]];
  return z;
}

VectorXd Sample::assemble_x(const VectorXd& u, const VectorXd& z) const {
  if (u.size() != dim_u() || z.size() != dim_z())
    throw DataError("covariate blocks have wrong dimensions");
  const int d = dim_u() + dim_z();
  if (!obs.empty() && obs.front().x.size() != d)
    throw DataError("sample columns are not exactly the declared u and z blocks");
  VectorXd x = VectorXd::Zero(d);
  for (std::size_t k = 0; k < u_cols.size(); ++k) x[u_cols[k]] = u[static_cast<int>(k)];
  for (std::size_t k = 0; k < z_cols.size(); ++k) x[z_cols[k]] = z[static_cast<int>(k)];
  return x;
}

void Sample::validate() const {
  if (obs.empty()) throw DataError("sample is empty");
  if (u_cols.empty()) throw DataError("sample declares no propensity-side covariates");
  const int d = static_cast<int>(obs.front().x.size());
  for (int c : u_cols) {
    if (c < 0 || c >= d) throw DataError("u column index out of range");
  }
  for (int c : z_cols) {
    if (c < 0 || c >= d) throw DataError("z column index out of range");
  }
  for (int cu : u_cols) {
    for (int cz : z_cols) {
      if (cu == cz) throw DataError("u and z column sets overlap");
    }
  }
  int n1 = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& o = obs[i];
    if (o.x.size() != d) throw DataError("ragged covariate rows in sample");
    if (o.r != 0 && o.r != 1) throw DataError("response indicator outside {0,1}");
    if (o.r == 1 && !std::isfinite(o.y_raw)) throw DataError("non-finite outcome on a respondent row");
    if (!o.x.allFinite()) throw DataError("non-finite covariate value");
    n1 += o.r;
  }
  if (n1 == 0) throw DataError("sample has no respondents");
}

}  // namespace nmar
