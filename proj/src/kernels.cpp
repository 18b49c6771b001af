#include "mlrwl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mlrwl {

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  spec.validate();
  if (x.size() != y.size())
    throw DimensionMismatchError("kernel_eval: point dimensions differ");
  if (spec.kind == KernelSpec::Kind::linear) return x.dot(y);
  const double d2 = (x - y).squaredNorm();
  return std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
}

Eigen::MatrixXd cross_kernel(const KernelSpec& spec, const Eigen::MatrixXd& A,
                             const Eigen::MatrixXd& B) {
  spec.validate();
  if (A.cols() != B.cols())
    throw DimensionMismatchError("cross_kernel: point dimensions differ");
  if (spec.kind == KernelSpec::Kind::linear) return A * B.transpose();
  const Eigen::VectorXd an = A.rowwise().squaredNorm();
  const Eigen::VectorXd bn = B.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (A * B.transpose());
  d2.colwise() += an;
  d2.rowwise() += bn.transpose();
  const double inv = -1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
  return (d2.cwiseMax(0.0) * inv).array().exp();
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd K = cross_kernel(spec, X, X);
  // Exact symmetry regardless of the BLAS path taken above.
  K = ((K + K.transpose()) * 0.5).eval();
  if (spec.kind == KernelSpec::Kind::rbf) K.diagonal().setOnes();
  return K;
}

double median_bandwidth(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  if (n < 2) throw DegenerateDataError("median_bandwidth: need at least two rows");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = (X.row(i) - X.row(j)).norm();
      if (d > 0.0) dists.push_back(d);
    }
  if (dists.empty())
    throw DegenerateDataError("median_bandwidth: all rows identical");
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + mid, dists.end());
  const double upper = dists[mid];
  if (dists.size() % 2 == 1) return upper;
  const double lower = *std::max_element(dists.begin(), dists.begin() + mid);
  return 0.5 * (lower + upper);
}

}  // namespace mlrwl
