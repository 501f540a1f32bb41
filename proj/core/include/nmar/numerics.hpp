#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

namespace nmar {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Nodes and weights for E[f(T)] with T standard normal: sum_i w_i f(t_i)
// integrates polynomials up to degree 2n-1 exactly. Weights sum to one.
struct GaussHermite {
  VectorXd nodes;
  VectorXd weights;
};
GaussHermite gauss_hermite(int n);

struct RootResult {
  double root = 0.0;
  int iterations = 0;
};

// Root of f on a bracket [lo, hi] with f(lo), f(hi) of opposite sign,
// refined to near machine precision in the abscissa.
RootResult bracketed_root(const std::function<double(double)>& f, double lo, double hi,
                          double flo, double fhi, int max_iter);

// Forward-difference Jacobian of f: R^d -> R^m at point, with a step
// proportional to 1 + |coordinate|.
MatrixXd fd_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& point,
                     double rel_step = 1e-5);

// Sample standard deviation with the n-1 divisor; returns 0 for n < 2.
double sample_sd(const std::vector<double>& values);

}  // namespace nmar
