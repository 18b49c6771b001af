#pragma once

#include <Eigen/Dense>

#include "mlrwl/errors.hpp"

namespace mlrwl {

struct KernelSpec {
  enum class Kind { linear, rbf };
  Kind kind = Kind::linear;
  double bandwidth = 1.0;  // rbf lengthscale, same units as covariate distance

  void validate() const {
    if (kind == Kind::rbf && !(bandwidth > 0.0))
      throw InvalidInputError("rbf kernel requires bandwidth > 0");
  }
};

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// K_ij = k(x_i, x_j). Symmetric; PSD up to rounding (see project_psd).
Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X);

// Rectangular block k(a_i, b_j) for evaluating expansions on new points.
Eigen::MatrixXd cross_kernel(const KernelSpec& spec, const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& B);

// Median of pairwise Euclidean distances over distinct pairs, zero distances
// excluded so duplicated rows cannot collapse the bandwidth.
double median_bandwidth(const Eigen::MatrixXd& X);

}  // namespace mlrwl
