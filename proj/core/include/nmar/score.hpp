#pragma once

#include <Eigen/Dense>

#include "nmar/moments.hpp"

namespace nmar {

// Evaluates the working-model efficient score
//   S(x, y, r; b) = [a(u) d1(x) - d3(x)] / dstar(x) * [1 - r (1 + e^{-gstar(u) - h(y,b)})]
// with dstar = d1 + e^{-gstar(u)} d2 and
//   a(u) = E{ d3 d1 / dstar | u, R=1 } / E{ d1^2 / dstar | u, R=1 },
// caching every per-row quantity at the most recent tilt parameter so that
// solver sweeps, sandwich difference quotients, and nuisance corrections can
// share one pass over the data.
class ScoreEngine {
 public:
  // The sample, spec, and provider are retained by reference and must
  // outlive the engine; temporaries are rejected outright.
  ScoreEngine(const Sample& sample, const ModelSpec& spec, const MomentProvider& provider);
  ScoreEngine(const Sample&, ModelSpec&&, const MomentProvider&) = delete;
  ScoreEngine(Sample&&, const ModelSpec&, const MomentProvider&) = delete;

  // Sum over rows of the efficient score; the estimating equation solved for b.
  VectorXd estimating_equation(const VectorXd& beta);

  // All per-row scores at b, one row per observation.
  const MatrixXd& all_scores(const VectorXd& beta);

  VectorXd efficient_score(int i, const VectorXd& beta);

  // Point queries at arbitrary covariate values (no caching).
  double d_star_at(const VectorXd& x, const VectorXd& beta) const;
  VectorXd a_star_at(const VectorXd& u, const VectorXd& beta) const;

  // Cached per-row quantities at the last evaluated b (rebuilds if needed).
  const DeltaTriple& delta(int i, const VectorXd& beta);
  double d_star(int i, const VectorXd& beta);
  const VectorXd& a_star(int i, const VectorXd& beta);
  double e_gstar(int i) const { return e_gstar_[i]; }
  double gstar_value(int i) const { return gstar_val_[i]; }

  const Sample& sample() const { return *sample_; }
  const ModelSpec& spec() const { return *spec_; }
  const MomentProvider& provider() const { return *provider_; }

  // Times an exponent hit the overflow guard while forming e^{-gstar} terms.
  long clamp_count() const { return clamp_count_; }

 private:
  void ensure(const VectorXd& beta);
  double safe_exp(double exponent);

  const Sample* sample_;
  const ModelSpec* spec_;
  const MomentProvider* provider_;

  std::vector<VectorXd> u_;       // propensity-side block per row
  std::vector<double> gstar_val_;  // gstar(u_i)
  std::vector<double> e_gstar_;    // e^{-gstar(u_i)}, overflow-guarded

  bool valid_ = false;
  VectorXd beta_;
  std::vector<DeltaTriple> delta_;
  std::vector<double> dstar_;
  std::vector<VectorXd> astar_;
  MatrixXd scores_;
  long clamp_count_ = 0;
};

}  // namespace nmar
