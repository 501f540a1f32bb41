#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "nmar/errors.hpp"
#include "nmar/kernels.hpp"

using namespace nmar;

namespace {

// Simpson quadrature of t^p K(t) over the kernel's effective support,
// deliberately independent of any library integration code.
double kernel_moment(KernelFamily fam, int p) {
  const double a = (fam == KernelFamily::gaussian) ? -12.0 : -1.0;
  const double b = -a;
  const int n = 200001;  // odd
  const double step = (b - a) / (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = a + step * i;
    const double f = std::pow(t, p) * kernel_value(fam, t);
    const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum += w * f;
  }
  return sum * step / 3.0;
}

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

}  // namespace

TEST_CASE("second-order kernels integrate to one with zero mean") {
  for (KernelFamily fam : {KernelFamily::gaussian, KernelFamily::triweight}) {
    CHECK(std::abs(kernel_moment(fam, 0) - 1.0) < 1e-8);
    CHECK(std::abs(kernel_moment(fam, 1)) < 1e-12);
    CHECK(kernel_order(fam) == 2);
  }
  CHECK(std::abs(kernel_moment(KernelFamily::gaussian, 2) - 1.0) < 1e-7);
  CHECK(std::abs(kernel_moment(KernelFamily::triweight, 2) - 1.0 / 9.0) < 1e-9);
}

TEST_CASE("fourth-order kernel kills the second moment") {
  const KernelFamily fam = KernelFamily::triweight4;
  CHECK(kernel_order(fam) == 4);
  CHECK(std::abs(kernel_moment(fam, 0) - 1.0) < 1e-6);
  CHECK(std::abs(kernel_moment(fam, 1)) < 1e-12);
  CHECK(std::abs(kernel_moment(fam, 2)) < 1e-6);
  CHECK(std::abs(kernel_moment(fam, 3)) < 1e-12);
  CHECK(std::abs(kernel_moment(fam, 4) - (-3.0 / 143.0)) < 1e-6);
}

TEST_CASE("compact-support kernels vanish outside the unit interval") {
  for (KernelFamily fam : {KernelFamily::triweight, KernelFamily::triweight4}) {
    CHECK(kernel_value(fam, 1.2) == 0.0);
    CHECK(kernel_value(fam, -1.0001) == 0.0);
    CHECK(kernel_value(fam, 0.0) > 0.0);
  }
}

TEST_CASE("bandwidth rule scales a power of the full sample size") {
  KernelSpec spec;
  spec.scale = 1.5;
  spec.rate = 1.0 / 3.0;
  CHECK(std::abs(spec.bandwidth(1000) - 0.15) < 1e-12);
  CHECK(std::abs(spec.bandwidth(8) - 0.75) < 1e-12);
  spec.rate = 0.2;
  CHECK(std::abs(spec.bandwidth(32) - 1.5 * std::pow(32.0, -0.2)) < 1e-14);
}

TEST_CASE("kernel spec parsing and round-trip") {
  const KernelSpec def = KernelSpec::parse("gaussian");
  CHECK(def.family == KernelFamily::gaussian);
  CHECK(def.scale == 1.5);
  CHECK(std::abs(def.rate - 1.0 / 3.0) < 1e-15);

  const KernelSpec tw = KernelSpec::parse("triweight4:c=2:gamma=0.25");
  CHECK(tw.family == KernelFamily::triweight4);
  CHECK(tw.scale == 2.0);
  CHECK(tw.rate == 0.25);

  const KernelSpec frac = KernelSpec::parse("triweight:gamma=1/3");
  CHECK(frac.family == KernelFamily::triweight);
  CHECK(std::abs(frac.rate - 1.0 / 3.0) < 1e-15);

  const KernelSpec back = KernelSpec::parse(tw.to_string());
  CHECK(back.family == tw.family);
  CHECK(back.scale == tw.scale);
  CHECK(back.rate == tw.rate);

  CHECK_THROWS_AS(KernelSpec::parse("tophat"), ConfigError);
  CHECK_THROWS_AS(KernelSpec::parse("gaussian:c=abc"), ConfigError);
  CHECK_THROWS_AS(KernelSpec::parse("gaussian:c=-1"), ConfigError);
}

TEST_CASE("product weight factorizes over coordinates") {
  const VectorXd p = vec2(0.4, -0.3);
  const VectorXd q = vec2(0.1, 0.2);
  const double bw = 0.7;
  for (KernelFamily fam :
       {KernelFamily::gaussian, KernelFamily::triweight, KernelFamily::triweight4}) {
    const double w = product_weight(fam, p, q, bw);
    const double manual =
        kernel_value(fam, (p[0] - q[0]) / bw) * kernel_value(fam, (p[1] - q[1]) / bw);
    CHECK(std::abs(w - manual) < 1e-15);
  }
}

TEST_CASE("kernel regression reproduces a frozen probe") {
  const std::vector<VectorXd> pts = {vec1(0.0), vec1(1.0), vec1(2.0)};
  const std::vector<double> targets = {0.0, 1.0, 4.0};
  KernelSpec spec;
  spec.family = KernelFamily::gaussian;
  const double value = nw_regress(targets, pts, vec1(1.0), spec, 1.0);
  CHECK(std::abs(value - 1.548137238122394) < 1e-10);
}

TEST_CASE("kernel regression with a nonnegative kernel stays within the target range") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<VectorXd> pts;
    std::vector<double> targets;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int i = 0; i < 9; ++i) {
      pts.push_back(vec2(unif(rng), unif(rng)));
      targets.push_back(unif(rng));
      lo = std::min(lo, targets.back());
      hi = std::max(hi, targets.back());
    }
    KernelSpec spec;
    spec.family = (rep % 2 == 0) ? KernelFamily::gaussian : KernelFamily::triweight;
    const VectorXd query = vec2(unif(rng), unif(rng));
    try {
      const double v = nw_regress(targets, pts, query, spec, 0.9);
      CHECK(v >= lo - 1e-12);
      CHECK(v <= hi + 1e-12);
    } catch (const EmptyNeighborhood&) {
      // legitimate for the compact-support kernel with an isolated query
    }
  }
}

TEST_CASE("kernel regression throws when the query carries no mass") {
  const std::vector<VectorXd> pts = {vec1(0.0), vec1(0.2)};
  const std::vector<double> targets = {1.0, 2.0};
  KernelSpec spec;
  spec.family = KernelFamily::triweight;
  CHECK_THROWS_AS(nw_regress(targets, pts, vec1(5.0), spec, 1.0), EmptyNeighborhood);
}

TEST_CASE("fourth-order kernel admits negative local averages without throwing") {
  // Negative weights mean the locally-weighted average may leave the convex
  // hull of the targets; only exact zero mass is an error.
  const std::vector<VectorXd> pts = {vec1(0.0), vec1(0.95)};
  const std::vector<double> targets = {0.0, 10.0};
  KernelSpec spec;
  spec.family = KernelFamily::triweight4;
  const double v = nw_regress(targets, pts, vec1(0.15), spec, 1.0);
  CHECK(std::isfinite(v));
}
