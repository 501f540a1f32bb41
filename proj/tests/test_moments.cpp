#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "nmar/design.hpp"
#include "nmar/moments.hpp"
#include "nmar/simlab.hpp"

using namespace nmar;

namespace {

VectorXd vec1(double a) {
  VectorXd v(1);
  v << a;
  return v;
}

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

ModelSpec misspec_A() {
  const Design d = design_A();
  return ModelSpec{HFamily::linear(), d.g_star};
}

// Small hand-built dataset: u around its instrument category, a few
// nonrespondents sprinkled in.
Sample tiny_sample() {
  Sample s;
  s.u_cols = {0};
  s.z_cols = {1};
  const double us[] = {0.1, -0.8, 1.3, 0.4, 2.1, -1.1, 0.9, 1.6};
  const double zs[] = {1.0, -1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0};
  const double ys[] = {0.7, 2.9, 0.2, 0.5, 1.4, 4.1, 3.0, 0.0};
  const int rs[] = {1, 1, 1, 0, 1, 1, 0, 0};
  for (int i = 0; i < 8; ++i) {
    Observation o;
    o.x = vec2(us[i], zs[i]);
    o.r = rs[i];
    o.y_raw = rs[i] == 1 ? ys[i] : 0.0;
    s.obs.push_back(o);
  }
  return s;
}

}  // namespace

TEST_CASE("oracle tilt moments at a frozen probe") {
  const Design d = design_A();
  const OracleProvider oracle(d, misspec_A());
  const DeltaTriple t = oracle.inner_moments(vec2(1.0, 1.0), vec1(-0.2));
  // m = 0 at this covariate point, so d1 = exp(beta^2/2).
  CHECK(std::abs(t.d1 - 1.0202013400267558) < 1e-12);
  CHECK(std::abs(t.d2 - std::exp(2.0 * 0.04)) < 1e-12);
  // Linear tilt: d3 = -(m + beta sigma^2) d1.
  CHECK(std::abs(t.d3[0] - (-(0.0 - 0.2) * t.d1)) < 1e-12);
}

TEST_CASE("tilt moments collapse at zero tilt") {
  const Design d = design_A();
  const OracleProvider oracle(d, misspec_A());
  const DeltaTriple t = oracle.inner_moments(vec2(1.0, -1.0), vec1(0.0));
  CHECK(t.d1 == 1.0);
  CHECK(t.d2 == 1.0);
  const double m = 4.0;  // (u - z)^2 at u=1, z=-1
  CHECK(std::abs(t.d3[0] - (-m)) < 1e-12);
}

TEST_CASE("second tilt moment dominates the squared first moment") {
  const Design d = design_A();
  const OracleProvider oracle(d, misspec_A());
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int k = 0; k < 200; ++k) {
    const double u = unif(rng);
    const double z = (k % 2 == 0) ? 1.0 : -1.0;
    const VectorXd beta = vec1(unif(rng) / 2.0);
    const DeltaTriple t = oracle.inner_moments(vec2(u, z), beta);
    CHECK(t.d2 + 1e-12 >= t.d1 * t.d1);
  }
}

TEST_CASE("fitted and smoothed providers keep the moment inequality") {
  const Design d = design_A();
  const SimSample sim = generate(d, 400, 99);
  const ModelSpec spec = misspec_A();
  const ParametricProvider par(
      sim.sample, spec,
      [&d](const VectorXd& x) { return d.basis(x.head(1), x[1]); }, d.g_true);
  const NonparametricProvider np(sim.sample, spec, KernelSpec{}, KernelSpec{});
  const VectorXd beta = vec1(-0.2);
  for (int i = 0; i < sim.sample.size(); i += 17) {
    const VectorXd& x = sim.sample.obs[i].x;
    const DeltaTriple tp = par.inner_moments(x, beta);
    CHECK(tp.d2 + 1e-10 >= tp.d1 * tp.d1);
    const DeltaTriple tn = np.inner_moments(x, beta);
    CHECK(tn.d2 + 1e-10 >= tn.d1 * tn.d1);
  }
}

TEST_CASE("parametric provider approaches the oracle on large samples") {
  const Design d = design_A();
  const SimSample sim = generate(d, 40000, 2024);
  const ModelSpec spec = misspec_A();
  const ParametricProvider par(
      sim.sample, spec,
      [&d](const VectorXd& x) { return d.basis(x.head(1), x[1]); }, d.g_true);
  const OracleProvider oracle(d, spec);

  CHECK(std::abs(par.fitted_variance() - d.sigma2) < 0.05);
  const VectorXd beta = vec1(-0.2);
  for (const double u : {-0.5, 0.3, 1.2}) {
    for (const double z : {-1.0, 1.0}) {
      const VectorXd x = vec2(u, z);
      CHECK(std::abs(par.fitted_mean(x) - d.outcome_mean(vec1(u), z)) < 0.06);
      const DeltaTriple a = par.inner_moments(x, beta);
      const DeltaTriple b = oracle.inner_moments(x, beta);
      CHECK(std::abs(a.d1 - b.d1) < 0.02 * b.d1);
      CHECK(std::abs(a.d2 - b.d2) < 0.03 * b.d2);
      CHECK(std::abs(par.tilted_mean(x, beta) - oracle.tilted_mean(x, beta)) < 0.06);
    }
  }

  // Outer averages built from the fitted marginal law agree too.
  auto d1_integrand = [&](const MomentProvider& p) {
    return [&p, &beta](const VectorXd& x, int) {
      return VectorXd::Constant(1, p.inner_moments(x, beta).d1);
    };
  };
  const double from_par = par.outer_expect(vec1(0.3), beta, 1, d1_integrand(par))[0];
  const double from_oracle = oracle.outer_expect(vec1(0.3), beta, 1, d1_integrand(oracle))[0];
  CHECK(std::abs(from_par - from_oracle) < 0.05 * from_oracle);
}

TEST_CASE("outer averaging preserves constants for every provider") {
  const Design d = design_A();
  const ModelSpec spec = misspec_A();
  const SimSample sim = generate(d, 300, 5);
  const OracleProvider oracle(d, spec);
  const ParametricProvider par(
      sim.sample, spec,
      [&d](const VectorXd& x) { return d.basis(x.head(1), x[1]); }, d.g_true);
  const NonparametricProvider np(sim.sample, spec, KernelSpec{}, KernelSpec{});
  const auto constant = [](const VectorXd&, int) { return VectorXd::Constant(1, 3.7); };
  const VectorXd beta = vec1(-0.2);
  CHECK(std::abs(oracle.outer_expect(vec1(0.4), beta, 1, constant)[0] - 3.7) < 1e-12);
  CHECK(std::abs(par.outer_expect(vec1(0.4), beta, 1, constant)[0] - 3.7) < 1e-12);
  CHECK(std::abs(np.outer_expect(vec1(0.4), beta, 1, constant)[0] - 3.7) < 1e-12);
}

TEST_CASE("oracle outer average of the first tilt moment at frozen probes") {
  const Design d = design_A();
  const OracleProvider oracle(d, misspec_A());
  const VectorXd beta = vec1(-0.2);
  const auto d1_int = [&](const VectorXd& x, int) {
    return VectorXd::Constant(1, oracle.inner_moments(x, beta).d1);
  };
  CHECK(std::abs(oracle.outer_expect(vec1(0.0), beta, 1, d1_int)[0] - 0.835270211411272) <
        1e-10);
  CHECK(std::abs(oracle.outer_expect(vec1(1.0), beta, 1, d1_int)[0] - 0.9300640770470026) <
        1e-10);
}

TEST_CASE("oracle instrument posterior at a frozen probe") {
  // Averaging the indicator of the positive instrument category recovers its
  // posterior mass given the covariate and response.
  const Design d = design_A();
  const OracleProvider oracle(d, misspec_A());
  const VectorXd beta = vec1(-0.2);
  const auto indicator = [](const VectorXd& x, int) {
    return VectorXd::Constant(1, x[1] > 0.0 ? 1.0 : 0.0);
  };
  const double mass = oracle.outer_expect(vec1(1.0), beta, 1, indicator)[0];
  CHECK(std::abs(mass - 0.839554979595724) < 1e-10);
  const double comp = oracle.outer_expect(vec1(1.0), beta, 1, [](const VectorXd& x, int) {
    return VectorXd::Constant(1, x[1] > 0.0 ? 0.0 : 1.0);
  })[0];
  CHECK(std::abs(mass + comp - 1.0) < 1e-12);
}

TEST_CASE("smoothed tilt moments match independent weighted sums") {
  const Sample s = tiny_sample();
  const ModelSpec spec = misspec_A();
  const NonparametricProvider np(s, spec, KernelSpec{}, KernelSpec{});
  const double bw = 1.5 / std::cbrt(8.0);
  CHECK(std::abs(np.bandwidth_x() - bw) < 1e-14);

  const VectorXd beta = vec1(-0.3);
  const VectorXd query = vec2(0.5, 1.0);
  long double num1 = 0, num2 = 0, num3 = 0, den = 0;
  const double inv_norm = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
  for (const auto& o : s.obs) {
    if (o.r != 1) continue;
    const double t0 = (o.x[0] - query[0]) / bw;
    const double t1 = (o.x[1] - query[1]) / bw;
    const double w =
        inv_norm * std::exp(-0.5 * t0 * t0) * inv_norm * std::exp(-0.5 * t1 * t1);
    const double tilt = std::exp(beta[0] * o.y());
    num1 += w * tilt;
    num2 += w * tilt * tilt;
    num3 += w * (-o.y()) * tilt;
    den += w;
  }
  const DeltaTriple t = np.inner_moments(query, beta);
  CHECK(std::abs(t.d1 - static_cast<double>(num1 / den)) < 1e-10);
  CHECK(std::abs(t.d2 - static_cast<double>(num2 / den)) < 1e-10);
  CHECK(std::abs(t.d3[0] - static_cast<double>(num3 / den)) < 1e-10);
}

TEST_CASE("smoothed response rate matches an independent weighted sum") {
  const Sample s = tiny_sample();
  const NonparametricProvider np(s, misspec_A(), KernelSpec{}, KernelSpec{});
  const double bw = np.bandwidth_x();
  const VectorXd query = vec2(0.2, -1.0);
  long double num = 0, den = 0;
  const double inv_norm = 1.0 / std::sqrt(2.0 * 3.14159265358979323846);
  for (const auto& o : s.obs) {
    const double t0 = (o.x[0] - query[0]) / bw;
    const double t1 = (o.x[1] - query[1]) / bw;
    const double w =
        inv_norm * std::exp(-0.5 * t0 * t0) * inv_norm * std::exp(-0.5 * t1 * t1);
    num += w * o.r;
    den += w;
  }
  CHECK(std::abs(np.response_rate(query) - static_cast<double>(num / den)) < 1e-12);
}

TEST_CASE("smoothed moments throw when the query is isolated") {
  Sample s = tiny_sample();
  KernelSpec compact;
  compact.family = KernelFamily::triweight;
  const NonparametricProvider np(s, misspec_A(), compact, compact);
  CHECK_THROWS_AS(np.inner_moments(vec2(50.0, 1.0), vec1(-0.2)), EmptyNeighborhood);
}

TEST_CASE("degenerate respondent regression is rejected") {
  const Design d = design_A();
  Sample s;
  s.u_cols = {0};
  s.z_cols = {1};
  for (int i = 0; i < 12; ++i) {
    Observation o;
    o.x = vec2(0.1 * i - 0.5, i % 2 == 0 ? 1.0 : -1.0);
    o.r = 1;
    o.y_raw = 5.0;  // zero residual variance
    s.obs.push_back(o);
  }
  const auto basis = [&d](const VectorXd& x) { return d.basis(x.head(1), x[1]); };
  CHECK_THROWS_AS(ParametricProvider(s, misspec_A(), basis, d.g_true), DegenerateConditional);
}

TEST_CASE("parametric fit demands enough respondents") {
  const Design d = design_A();
  Sample s;
  s.u_cols = {0};
  s.z_cols = {1};
  for (int i = 0; i < 8; ++i) {
    Observation o;
    o.x = vec2(0.3 * i, i % 2 == 0 ? 1.0 : -1.0);
    o.r = i < 3 ? 1 : 0;  // three respondents, basis dimension two
    o.y_raw = o.r ? 1.0 + 0.1 * i : 0.0;
    s.obs.push_back(o);
  }
  const auto basis = [&d](const VectorXd& x) { return d.basis(x.head(1), x[1]); };
  CHECK_THROWS_AS(ParametricProvider(s, misspec_A(), basis, d.g_true), DataError);
}

TEST_CASE("parametric fit rejects a singleton instrument category") {
  const Design d = design_A();
  Sample s;
  s.u_cols = {0};
  s.z_cols = {1};
  for (int i = 0; i < 10; ++i) {
    Observation o;
    const double z = (i == 9) ? 2.0 : (i % 2 == 0 ? 1.0 : -1.0);
    o.x = vec2(0.25 * i - 1.0, z);
    o.r = 1;
    o.y_raw = 0.5 * i + 0.1 * ((i * 7) % 3);
    s.obs.push_back(o);
  }
  const auto basis = [&d](const VectorXd& x) { return d.basis(x.head(1), x[1]); };
  CHECK_THROWS_AS(ParametricProvider(s, misspec_A(), basis, d.g_true), DataError);
}

TEST_CASE("provider names round-trip") {
  for (ProviderKind k :
       {ProviderKind::oracle, ProviderKind::parametric, ProviderKind::nonparametric}) {
    CHECK(provider_by_name(provider_name(k)) == k);
  }
  CHECK_THROWS_AS(provider_by_name("magic"), ConfigError);
}

TEST_CASE("perturbing a nuisance coordinate shifts only that coordinate") {
  const Design d = design_A();
  const SimSample sim = generate(d, 500, 31);
  const ParametricProvider par(
      sim.sample, misspec_A(),
      [&d](const VectorXd& x) { return d.basis(x.head(1), x[1]); }, d.g_true);
  const VectorXd base = par.nuisance();
  const double step = 1e-4;
  for (int c = 0; c < base.size(); ++c) {
    const auto shifted = par.perturbed(c, step);
    const VectorXd moved = shifted->nuisance();
    for (int j = 0; j < base.size(); ++j) {
      const double expect = base[j] + (j == c ? step : 0.0);
      CHECK(std::abs(moved[j] - expect) < 1e-12);
    }
  }
}
