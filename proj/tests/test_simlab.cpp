#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "nmar/design.hpp"
#include "nmar/simlab.hpp"

using namespace nmar;

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

McOptions beta_options(const Design& d) {
  McOptions opts;
  opts.provider = ProviderKind::oracle;
  opts.gstar = d.g_star;
  opts.theta_se = ThetaSeMethod::none;
  return opts;
}

}  // namespace

TEST_CASE("registered designs validate and carry frozen truths") {
  for (const std::string id : {"A", "B1", "B2"}) {
    const Design d = design_by_id(id);
    CHECK_NOTHROW(d.validate());
  }
  CHECK(std::abs(theta_truth(design_A()) - 0.889152) < 1e-6);
  CHECK(std::abs(theta_truth(design_B1()) - 0.959810) < 1e-6);
  CHECK(std::abs(theta_truth(design_B2()) - 1.963752) < 1e-6);
  CHECK(std::abs(missing_rate_truth(design_A()) - 0.5542) < 1e-4);
  CHECK(std::abs(missing_rate_truth(design_B1()) - 0.4019) < 1e-4);
  CHECK(std::abs(missing_rate_truth(design_B2()) - 0.3625) < 1e-4);
  CHECK_THROWS_AS(design_by_id("Z9"), ConfigError);
}

TEST_CASE("three working-shift diagnostics are registered per design") {
  for (const std::string id : {"A", "B1", "B2"}) {
    const Design d = design_by_id(id);
    const auto choices = gstar_choices(d);
    CHECK(choices.size() == 3);
    for (const auto& g : choices) CHECK(g.dim() == d.dim_u);
  }
}

TEST_CASE("generation is reproducible and seed-sensitive") {
  const Design d = design_A();
  const SimSample a = generate(d, 50, 9);
  const SimSample b = generate(d, 50, 9);
  const SimSample c = generate(d, 50, 10);
  REQUIRE(a.sample.size() == 50);
  REQUIRE(a.latent_y.size() == 50);
  bool differs = false;
  for (int i = 0; i < 50; ++i) {
    CHECK(a.latent_y[i] == b.latent_y[i]);
    CHECK(a.sample.obs[i].r == b.sample.obs[i].r);
    CHECK((a.sample.obs[i].x - b.sample.obs[i].x).norm() == 0.0);
    differs = differs || a.latent_y[i] != c.latent_y[i];
  }
  CHECK(differs);
}

TEST_CASE("respondent outcomes expose the latent draw") {
  const Design d = design_B2();
  const SimSample sim = generate(d, 200, 17);
  CHECK(sim.sample.dim_u() == 2);
  for (int i = 0; i < sim.sample.size(); ++i) {
    CHECK(std::isfinite(sim.latent_y[i]));
    if (sim.sample.obs[i].r == 1) {
      CHECK(sim.sample.obs[i].y() == sim.latent_y[i]);
    }
  }
}

TEST_CASE("generated nonresponse rate matches the population value") {
  const Design d = design_A();
  const int n = 1000000;
  const SimSample sim = generate(d, n, 1);
  double missing = 0.0;
  for (const auto& o : sim.sample.obs) missing += (o.r == 0) ? 1.0 : 0.0;
  missing /= n;
  CHECK(std::abs(missing - missing_rate_truth(d)) < 0.005);
}

TEST_CASE("benchmark estimators behave at the extremes") {
  const Design d = design_A();
  const SimSample sim = generate(d, 8000, 25);
  const double truth = theta_truth(d);
  // Outcome-dependent response with a negative tilt favors large outcomes.
  CHECK(naive_estimator(sim.sample) - truth > 0.05);
  double latent_mean = 0.0;
  for (int i = 0; i < sim.sample.size(); ++i) latent_mean += sim.latent_y[i];
  latent_mean /= sim.sample.size();
  // Summation order differs between the library and this loop, so agreement
  // is to rounding, not bitwise.
  CHECK(std::abs(oracle_estimator(sim) - latent_mean) < 1e-12 * std::abs(latent_mean));
  CHECK(std::abs(latent_mean - truth) < 0.06);

  SimSample stripped = sim;
  stripped.latent_y.resize(0);
  CHECK_THROWS_AS(oracle_estimator(stripped), OracleUnavailable);
}

TEST_CASE("metric aggregation matches its definitions") {
  const std::vector<double> est = {0.1, 0.15, 0.2, 0.3};
  const std::vector<double> ses = {0.05, 0.04, 0.06, 0.05};
  const double truth = 0.18;
  const MetricsRow row = aggregate_metrics("demo", truth, est, ses, 0);

  double mean = 0.0;
  for (double e : est) mean += e;
  mean /= est.size();
  CHECK(std::abs(row.bias - (mean - truth)) < 1e-15);

  double mse = 0.0;
  for (double e : est) mse += (e - truth) * (e - truth);
  mse /= est.size();
  CHECK(std::abs(row.rmse - std::sqrt(mse)) < 1e-15);

  // The mean-square error splits into squared bias plus the biased variance.
  const double r = static_cast<double>(est.size());
  const double identity = row.bias * row.bias + row.sd * row.sd * (r - 1.0) / r;
  CHECK(std::abs(row.rmse * row.rmse - identity) < 1e-12);

  int covered = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (std::abs(est[i] - truth) <= 1.96 * ses[i]) ++covered;
  }
  CHECK(row.cvp == 100.0 * covered / static_cast<double>(est.size()));
  CHECK(row.n_se == 4);
  CHECK(row.n_replicates == 4);
  CHECK_FALSE(row.flagged);
}

TEST_CASE("metric aggregation skips absent standard errors") {
  const std::vector<double> est = {0.1, 0.2, 0.3};
  const std::vector<double> ses = {0.05, kNan, 0.08};
  const MetricsRow row = aggregate_metrics("demo", 0.2, est, ses, 0);
  CHECK(row.n_se == 2);
  CHECK(std::abs(row.se - (0.05 + 0.08) / 2.0) < 1e-15);
}

TEST_CASE("degenerate replicates give exact zero spread and full coverage") {
  const std::vector<double> est(6, 0.42);
  const std::vector<double> ses(6, 0.0);
  const MetricsRow row = aggregate_metrics("demo", 0.42, est, ses, 0);
  CHECK(row.bias == 0.0);
  CHECK(row.sd == 0.0);
  CHECK(row.rmse == 0.0);
  CHECK(row.cvp == 100.0);
}

TEST_CASE("failure share above one in twenty flags the row") {
  const std::vector<double> est(9, 0.1);
  const std::vector<double> ses(9, 0.05);
  CHECK(aggregate_metrics("demo", 0.1, est, ses, 1).flagged);
  const std::vector<double> est2(39, 0.1);
  const std::vector<double> ses2(39, 0.05);
  CHECK_FALSE(aggregate_metrics("demo", 0.1, est2, ses2, 1).flagged);
  CHECK_THROWS_AS(aggregate_metrics("demo", 0.1, est, ses2, 0), ConfigError);
}

TEST_CASE("estimator labels round-trip") {
  for (EstimatorId id : {EstimatorId::beta_working, EstimatorId::theta_working,
                         EstimatorId::oracle_mean, EstimatorId::naive_mean}) {
    CHECK(estimator_by_label(estimator_label(id)) == id);
  }
  CHECK_THROWS_AS(estimator_by_label("bogus"), ConfigError);
}

TEST_CASE("replicate loop is deterministic in the master seed") {
  const Design d = design_A();
  const McOptions opts = beta_options(d);
  const auto rows1 = run_monte_carlo(d, 150, 4, {EstimatorId::beta_working}, 321, opts);
  const auto rows2 = run_monte_carlo(d, 150, 4, {EstimatorId::beta_working}, 321, opts);
  REQUIRE(rows1.size() == 1);
  CHECK(rows1[0].label == "beta_working");
  CHECK(rows1[0].truth == d.beta_true[0]);
  CHECK(rows1[0].n_replicates == 4);
  CHECK(rows1[0].bias == rows2[0].bias);
  CHECK(rows1[0].sd == rows2[0].sd);
  CHECK(rows1[0].se == rows2[0].se);
  CHECK(rows1[0].cvp == rows2[0].cvp);
}

TEST_CASE("replicate loop aggregates the full roster with outcome truth") {
  const Design d = design_B1();
  McOptions opts;
  opts.provider = ProviderKind::oracle;
  opts.gstar = d.g_star;
  opts.theta_se = ThetaSeMethod::influence;
  const auto rows = run_monte_carlo(
      d, 200, 3, {EstimatorId::theta_working, EstimatorId::naive_mean, EstimatorId::oracle_mean},
      55, opts);
  REQUIRE(rows.size() == 3);
  const double truth = theta_truth(d);
  for (const auto& row : rows) {
    CHECK(row.truth == truth);
    CHECK(row.n_replicates == 3);
    CHECK(row.n_failures == 0);
    CHECK(std::isfinite(row.bias));
  }
  CHECK(rows[0].label == "theta_working");
  CHECK(rows[1].label == "naive_mean");
  CHECK(rows[2].label == "oracle_mean");
  CHECK(rows[0].n_se == 3);  // influence errors are cheap enough for every replicate
}

TEST_CASE("standard-error subsetting limits the covered replicates") {
  const Design d = design_B1();
  McOptions opts;
  opts.provider = ProviderKind::oracle;
  opts.gstar = d.g_star;
  opts.theta_se = ThetaSeMethod::influence;
  opts.se_subset = 2;
  const auto rows = run_monte_carlo(d, 150, 5, {EstimatorId::theta_working}, 66, opts);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n_replicates == 5);
  CHECK(rows[0].n_se == 2);
}

TEST_CASE("skipping the outcome standard error leaves coverage undefined") {
  const Design d = design_B1();
  McOptions opts;
  opts.provider = ProviderKind::oracle;
  opts.gstar = d.g_star;
  opts.theta_se = ThetaSeMethod::none;
  const auto rows = run_monte_carlo(d, 150, 3, {EstimatorId::theta_working}, 77, opts);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n_se == 0);
  CHECK(std::isnan(rows[0].cvp));
  CHECK(std::isnan(rows[0].se));
}
