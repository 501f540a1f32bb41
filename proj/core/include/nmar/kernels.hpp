#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nmar/errors.hpp"

namespace nmar {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class KernelFamily {
  gaussian,    // standard normal density, order 2
  triweight,   // (35/32)(1-t^2)^3 on [-1,1], order 2
  triweight4,  // fourth-order twicing of the triweight on [-1,1]
};

// One-dimensional kernel value K(t).
double kernel_value(KernelFamily family, double t);

// Moment order of the family (2 or 4).
int kernel_order(KernelFamily family);

// Kernel choice plus the bandwidth rule b = scale * n^{-rate}, where n is
// always the full sample size of the dataset the smoother was built from.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double scale = 1.5;
  double rate = 1.0 / 3.0;

  double bandwidth(int n_full) const;
  void validate() const;  // throws ConfigError

  static KernelSpec parse(const std::string& text);  // "family[:c=..][:gamma=..]"
  std::string to_string() const;
};

// Product kernel weight prod_k K((x_k - q_k)/b) for a multivariate point.
double product_weight(KernelFamily family, const VectorXd& point, const VectorXd& query,
                      double bandwidth);

// Nadaraya-Watson regression of scalar targets on points, evaluated at one
// query: sum_j w_j t_j / sum_j w_j with w_j the product kernel weight.
// Throws EmptyNeighborhood when no point carries weight at the query.
double nw_regress(const std::vector<double>& targets, const std::vector<VectorXd>& points,
                  const VectorXd& query, const KernelSpec& spec, double bandwidth);

}  // namespace nmar
