#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "mlrwl/kernels.hpp"
#include "mlrwl/rng.hpp"

using namespace mlrwl;

namespace {

Eigen::MatrixXd random_matrix(int n, int p, Rng& rng) {
  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
  return X;
}

}  // namespace

TEST_CASE("kernel_eval closed forms") {
  KernelSpec rbf{KernelSpec::Kind::rbf, 1.0};
  Eigen::VectorXd x(2), y(2);
  x << 0.3, -0.7;
  CHECK(kernel_eval(rbf, x, x) == doctest::Approx(1.0));

  KernelSpec lin{KernelSpec::Kind::linear, 0.0};
  x << 1.0, 2.0;
  y << 3.0, -1.0;
  CHECK(kernel_eval(lin, x, y) == doctest::Approx(1.0));

  y << 0.3 + 1.0, -0.7;  // unit distance from x = (0.3, -0.7)
  x << 0.3, -0.7;
  CHECK(kernel_eval(rbf, x, y) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));

  Eigen::VectorXd z(3);
  CHECK_THROWS_AS(kernel_eval(rbf, x, z), DimensionMismatchError);
  CHECK_THROWS_AS(kernel_eval(KernelSpec{KernelSpec::Kind::rbf, 0.0}, x, x), InvalidInputError);
}

TEST_CASE("gram matrix structure") {
  Rng rng(5);
  const Eigen::MatrixXd X = random_matrix(6, 3, rng);

  KernelSpec rbf{KernelSpec::Kind::rbf, 0.8};
  const Eigen::MatrixXd K = gram_matrix(rbf, X);
  CHECK(K == K.transpose());
  CHECK(K.diagonal().isApproxToConstant(1.0));
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      CHECK(K(i, j) > 0.0);
      CHECK(K(i, j) <= 1.0);
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);

  KernelSpec lin{KernelSpec::Kind::linear, 0.0};
  const Eigen::MatrixXd KL = gram_matrix(lin, X);
  CHECK((KL - X * X.transpose()).cwiseAbs().maxCoeff() < 1e-14);

  // orthonormal rows give the identity
  Eigen::MatrixXd ortho = Eigen::MatrixXd::Identity(3, 3);
  CHECK(gram_matrix(lin, ortho).isApprox(Eigen::MatrixXd::Identity(3, 3)));
}

TEST_CASE("median bandwidth") {
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 1.0;
  CHECK(median_bandwidth(X) == doctest::Approx(1.0));

  Eigen::MatrixXd X3(3, 1);
  X3 << 0.0, 1.0, 2.0;
  CHECK(median_bandwidth(X3) == doctest::Approx(1.0));  // distances 1,1,2

  Eigen::MatrixXd X2(2, 2);
  X2 << 0.0, 0.0, 3.0, 4.0;
  CHECK(median_bandwidth(X2) == doctest::Approx(5.0));

  Eigen::MatrixXd Xdup(3, 2);
  Xdup << 1.0, 2.0, 1.0, 2.0, 1.0, 2.0;
  CHECK_THROWS_AS(median_bandwidth(Xdup), DegenerateDataError);
  CHECK_THROWS_AS(median_bandwidth(Eigen::MatrixXd::Zero(1, 2)), DegenerateDataError);

  // duplicated rows do not drag the median to zero
  Eigen::MatrixXd Xmix(4, 1);
  Xmix << 0.0, 0.0, 1.0, 1.0;
  CHECK(median_bandwidth(Xmix) == doctest::Approx(1.0));
}
