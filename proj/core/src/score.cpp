#include "nmar/score.hpp"

#include <cmath>

namespace nmar {

namespace {
constexpr double kMaxExponent = 700.0;  // just under log(DBL_MAX)
}

ScoreEngine::ScoreEngine(const Sample& sample, const ModelSpec& spec,
                         const MomentProvider& provider)
    : sample_(&sample), spec_(&spec), provider_(&provider) {
  sample.validate();
  if (spec.gstar.dim() != sample.dim_u())
    throw ConfigError("working shift dimension does not match the u block");
  const int n = sample.size();
  u_.reserve(n);
  gstar_val_.reserve(n);
  e_gstar_.reserve(n);
  for (int i = 0; i < n; ++i) {
    u_.push_back(sample.u_of(sample.obs[i].x));
    gstar_val_.push_back(spec.gstar(u_.back()));
    e_gstar_.push_back(safe_exp(-gstar_val_.back()));
  }
}

double ScoreEngine::safe_exp(double exponent) {
  if (exponent > kMaxExponent) {
    ++clamp_count_;
    exponent = kMaxExponent;
  } else if (exponent < -kMaxExponent) {
    ++clamp_count_;
    exponent = -kMaxExponent;
  }
  return std::exp(exponent);
}

void ScoreEngine::ensure(const VectorXd& beta) {
  bool same = valid_ && beta_.size() == beta.size();
  if (same) {
    for (int j = 0; j < beta.size(); ++j) {
      if (beta_[j] != beta[j]) {
        same = false;
        break;
      }
    }
  }
  if (same) return;
  beta_ = beta;
  const int n = sample_->size();
  const int d = static_cast<int>(beta.size());
  delta_.assign(n, DeltaTriple{});
  dstar_.assign(n, 0.0);
  astar_.assign(n, VectorXd());

  for (int i = 0; i < n; ++i) {
    delta_[i] = provider_->inner_moments(sample_->obs[i].x, beta);
    dstar_[i] = delta_[i].d1 + e_gstar_[i] * delta_[i].d2;
  }

  // a(u_i): one outer expectation per row, reusing this pass's inner moments
  // whenever the integrand lands on a dataset row.
  for (int i = 0; i < n; ++i) {
    const double eg_i = e_gstar_[i];
    auto integrand = [&](const VectorXd& x, int row) -> VectorXd {
      DeltaTriple dt;
      double eg;
      if (row >= 0) {
        dt = delta_[row];
        eg = e_gstar_[row];
      } else {
        dt = provider_->inner_moments(x, beta);
        eg = eg_i;  // synthetic posterior points share the queried u
      }
      const double ds = dt.d1 + eg * dt.d2;
      VectorXd out(d + 1);
      // A tilt that overflowed (or underflowed to zero) means the point
      // carries essentially no posterior mass; dropping it beats poisoning
      // the whole expectation with NaN.
      if (!(ds > 0.0) || !std::isfinite(ds) || !dt.d3.allFinite()) {
        out.setZero();
        return out;
      }
      const double ratio = dt.d1 / ds;  // in [0, 1] since ds >= d1
      out.head(d) = dt.d3 * ratio;
      out[d] = dt.d1 * ratio;
      return out;
    };
    const VectorXd acc = provider_->outer_expect(u_[i], beta, d + 1, integrand);
    const double den = acc[d];
    if (std::isfinite(den) && den <= 0.0)
      throw DegenerateConditional("projection coefficient lost its denominator");
    astar_[i] = acc.head(d) / den;
  }

  scores_.resize(n, d);
  for (int i = 0; i < n; ++i) {
    const auto& o = sample_->obs[i];
    // A row whose tilt moments left the representable range contributes a
    // vanishing score; see the posterior-mass argument above.
    VectorXd gx = VectorXd::Zero(d);
    if (dstar_[i] > 0.0 && std::isfinite(dstar_[i]) && std::isfinite(delta_[i].d1) &&
        delta_[i].d3.allFinite()) {
      gx = (astar_[i] * delta_[i].d1 - delta_[i].d3) / dstar_[i];
    }
    double bracket = 1.0;
    if (o.r == 1) {
      bracket = -safe_exp(-spec_->h.value(o.y(), beta) - gstar_val_[i]);
    }
    scores_.row(i) = (gx * bracket).transpose();
  }
  valid_ = true;
}

VectorXd ScoreEngine::estimating_equation(const VectorXd& beta) {
  ensure(beta);
  return scores_.colwise().sum().transpose();
}

const MatrixXd& ScoreEngine::all_scores(const VectorXd& beta) {
  ensure(beta);
  return scores_;
}

VectorXd ScoreEngine::efficient_score(int i, const VectorXd& beta) {
  ensure(beta);
  return scores_.row(i).transpose();
}

const DeltaTriple& ScoreEngine::delta(int i, const VectorXd& beta) {
  ensure(beta);
  return delta_[i];
}

double ScoreEngine::d_star(int i, const VectorXd& beta) {
  ensure(beta);
  return dstar_[i];
}

const VectorXd& ScoreEngine::a_star(int i, const VectorXd& beta) {
  ensure(beta);
  return astar_[i];
}

double ScoreEngine::d_star_at(const VectorXd& x, const VectorXd& beta) const {
  const DeltaTriple dt = provider_->inner_moments(x, beta);
  const VectorXd u = sample_->u_of(x);
  const double eg = std::exp(std::min(-spec_->gstar(u), kMaxExponent));
  return dt.d1 + eg * dt.d2;
}

VectorXd ScoreEngine::a_star_at(const VectorXd& u, const VectorXd& beta) const {
  const int d = static_cast<int>(beta.size());
  const double eg_q = std::exp(std::min(-spec_->gstar(u), kMaxExponent));
  auto integrand = [&](const VectorXd& x, int row) -> VectorXd {
    const DeltaTriple dt = provider_->inner_moments(x, beta);
    // Dataset rows carry their own u; synthetic posterior points share the query's.
    const double eg = row >= 0
                          ? std::exp(std::min(-spec_->gstar(sample_->u_of(x)), kMaxExponent))
                          : eg_q;
    const double ds = dt.d1 + eg * dt.d2;
    VectorXd out(d + 1);
    if (!(ds > 0.0) || !std::isfinite(ds) || !dt.d3.allFinite()) {
      out.setZero();
      return out;
    }
    const double ratio = dt.d1 / ds;
    out.head(d) = dt.d3 * ratio;
    out[d] = dt.d1 * ratio;
    return out;
  };
  const VectorXd acc = provider_->outer_expect(u, beta, d + 1, integrand);
  const double den = acc[d];
  if (std::isfinite(den) && den <= 0.0)
    throw DegenerateConditional("projection coefficient lost its denominator");
  return acc.head(d) / den;
}

}  // namespace nmar
