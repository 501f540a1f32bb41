#include "nmar/numerics.hpp"

#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>

#include "nmar/errors.hpp"

namespace nmar {

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw ConfigError("quadrature needs at least one node");
  // Golub-Welsch on the Jacobi matrix of the (probabilists') Hermite
  // recurrence: zero diagonal, off-diagonal sqrt(k).
  MatrixXd jacobi = MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(jacobi);
  if (eig.info() != Eigen::Success) throw NumericalError("quadrature eigen-decomposition failed");
  GaussHermite gh;
  gh.nodes = eig.eigenvalues();
  gh.weights = eig.eigenvectors().row(0).transpose().cwiseAbs2();
  // First-row squares already sum to one, matching the normalized weight.
  return gh;
}

RootResult bracketed_root(const std::function<double(double)>& f, double lo, double hi,
                          double flo, double fhi, int max_iter) {
  if (!(lo < hi)) throw NumericalError("root bracket is empty");
  if (flo == 0.0) return {lo, 0};
  if (fhi == 0.0) return {hi, 0};
  if ((flo > 0.0) == (fhi > 0.0)) throw NumericalError("root bracket does not straddle a sign change");
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
  const auto interval = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  RootResult out;
  out.root = 0.5 * (interval.first + interval.second);
  out.iterations = static_cast<int>(iters);
  return out;
}

MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& point,
                     double rel_step) {
  const VectorXd base = f(point);
  MatrixXd jac(base.size(), point.size());
  for (int j = 0; j < point.size(); ++j) {
    const double step = rel_step * (1.0 + std::abs(point[j]));
    VectorXd shifted = point;
    shifted[j] += step;
    jac.col(j) = (f(shifted) - base) / step;
  }
  return jac;
}

double sample_sd(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace nmar
