#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlrwl/rng.hpp"
#include "mlrwl/simgen.hpp"
#include "mlrwl/working_models.hpp"

using namespace mlrwl;

namespace {

TrialDataset dataset_with(const Eigen::MatrixXd& X, const std::vector<TreatmentVector>& A,
                          const Eigen::VectorXd& Y) {
  TrialDataset d;
  d.X = X;
  d.A = A;
  d.Y = Y;
  return d;
}

}  // namespace

TEST_CASE("propensity fit on uninformative covariates recovers class frequencies") {
  const int n = 40;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, 3);
  std::vector<TreatmentVector> A;
  for (int i = 0; i < n; ++i) A.push_back(TreatmentVector({i % 2 == 0 ? -1 : 1}));
  TrialDataset d = dataset_with(X, A, Eigen::VectorXd::Zero(n));
  const PropensityModel model = fit_propensity(d);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd probs = model.class_probabilities(x);
  CHECK(probs[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(probs[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(propensity_gradient_norm(model, d) <= 1e-6);
}

TEST_CASE("huge ridge drives slopes to zero, probabilities to class frequencies") {
  Rng rng(3);
  const int n = 300;
  Eigen::MatrixXd X(n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
  std::vector<TreatmentVector> A;
  for (int i = 0; i < n; ++i) A.push_back(TreatmentVector({i % 3 == 0 ? 1 : -1}));
  TrialDataset d = dataset_with(X, A, Eigen::VectorXd::Zero(n));
  const PropensityModel model = fit_propensity(d, 1e8, 1e-3);
  CHECK(model.tau.rightCols(2).cwiseAbs().maxCoeff() < 1e-5);
  const double freq_plus = 100.0 / 300.0;
  Eigen::VectorXd x(2);
  x << 0.4, -0.7;
  const Eigen::VectorXd probs = model.class_probabilities(x);
  CHECK(probs[1] == doctest::Approx(freq_plus).epsilon(1e-3));
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("uniform RCT assignment estimated close to 1/4") {
  Rng rng(17);
  const SimSetting setting = sim_setting(1);
  const TrialDataset d = gen_trial(setting, 2000, Design::rct, rng);
  const PropensityModel model = fit_propensity(d);
  CHECK(propensity_gradient_norm(model, d) <= 1e-6);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd probs = model.class_probabilities(d.X.row(i));
    CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-10));
    for (int j = 0; j < 4; ++j) {
      CHECK(probs[j] > 0.20);
      CHECK(probs[j] < 0.30);
    }
  }
}

TEST_CASE("predict_propensity softmax, floor and monotonicity") {
  PropensityModel model;
  model.num_treatments = 2;
  model.tau = Eigen::MatrixXd::Zero(4, 3);
  model.floor = 1e-3;
  Eigen::VectorXd x(2);
  x << 0.3, -0.8;
  for (const auto& a : enumerate_combinations(2))
    CHECK(predict_propensity(model, x, a) == doctest::Approx(0.25));

  PropensityModel floored;
  floored.num_treatments = 1;
  floored.tau = Eigen::MatrixXd::Zero(2, 2);
  floored.tau(0, 0) = std::log(0.01 / 0.99);  // class (-1) gets probability 0.01
  floored.floor = 0.05;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
  CHECK(floored.class_probabilities(x0)[0] == doctest::Approx(0.01));
  CHECK(predict_propensity(floored, x0, TreatmentVector({-1})) == doctest::Approx(0.05));

  PropensityModel steep;
  steep.num_treatments = 1;
  steep.tau = Eigen::MatrixXd::Zero(2, 2);
  steep.tau(0, 1) = -5.0;  // logit of (-1) falls with x
  steep.floor = 1e-6;
  Eigen::VectorXd big(1);
  big << 3.0;
  CHECK(predict_propensity(steep, big, TreatmentVector({1})) > 0.999);
}

TEST_CASE("treatment-free fit") {
  Rng rng(9);
  SUBCASE("exact linear outcome interpolates") {
    const int n = 50;
    Eigen::MatrixXd X(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd Y = 0.5 + (X * Eigen::Vector3d(1.0, -2.0, 0.25)).array();
    std::vector<TreatmentVector> A(static_cast<std::size_t>(n), TreatmentVector({1}));
    TrialDataset d = dataset_with(X, A, Y);
    const TreatmentFreeModel g = fit_treatment_free(d, Eigen::VectorXd::Constant(n, 0.5));
    CHECK((g.predict_all(X) - Y).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("recovers 1 + X1 + 2 X2 under vanishing noise") {
    const int n = 600;
    Eigen::MatrixXd X(n, 4);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 4; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd Y(n);
    for (int i = 0; i < n; ++i) Y[i] = 1.0 + X(i, 0) + 2.0 * X(i, 1) + 1e-7 * rng.normal();
    std::vector<TreatmentVector> A(static_cast<std::size_t>(n), TreatmentVector({1}));
    TrialDataset d = dataset_with(X, A, Y);
    const TreatmentFreeModel g = fit_treatment_free(d, Eigen::VectorXd::Constant(n, 0.25));
    CHECK(g.eta[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(g.eta[1] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(g.eta[2] == doctest::Approx(2.0).epsilon(1e-4));
    CHECK(std::abs(g.eta[3]) < 1e-4);
    CHECK(std::abs(g.eta[4]) < 1e-4);
  }
  SUBCASE("constant outcome gives an intercept-only model") {
    const int n = 30;
    Eigen::MatrixXd X(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    std::vector<TreatmentVector> A(static_cast<std::size_t>(n), TreatmentVector({-1}));
    TrialDataset d = dataset_with(X, A, Eigen::VectorXd::Constant(n, 3.25));
    const TreatmentFreeModel g = fit_treatment_free(d, Eigen::VectorXd::Constant(n, 1.0));
    CHECK(g.eta[0] == doctest::Approx(3.25).epsilon(1e-10));
    CHECK(std::abs(g.eta[1]) < 1e-10);
    CHECK(std::abs(g.eta[2]) < 1e-10);
  }
  SUBCASE("singular design raises a rank error suggesting ridge") {
    const int n = 20;
    Eigen::MatrixXd X(n, 2);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = rng.uniform(-1.0, 1.0);
      X(i, 1) = 2.0 * X(i, 0);  // collinear
    }
    std::vector<TreatmentVector> A(static_cast<std::size_t>(n), TreatmentVector({1}));
    TrialDataset d = dataset_with(X, A, Eigen::VectorXd::Zero(n));
    CHECK_THROWS_WITH_AS(fit_treatment_free(d, Eigen::VectorXd::Constant(n, 1.0)),
                         doctest::Contains("ridge"), DegenerateDataError);
  }
  SUBCASE("uniform-propensity WLS equals OLS") {
    const int n = 80;
    Eigen::MatrixXd X(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd Y(n);
    for (int i = 0; i < n; ++i) Y[i] = rng.uniform(-2.0, 2.0);
    std::vector<TreatmentVector> A(static_cast<std::size_t>(n), TreatmentVector({1}));
    TrialDataset d = dataset_with(X, A, Y);
    const TreatmentFreeModel wls = fit_treatment_free(d, Eigen::VectorXd::Constant(n, 0.125));
    const TreatmentFreeModel ols = fit_treatment_free(d, Eigen::VectorXd::Constant(n, 1.0));
    CHECK((wls.eta - ols.eta).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("residual weights") {
  Eigen::MatrixXd X(3, 2);
  X << 0.0, 0.0, 1.0, 0.0, 0.0, 1.0;
  std::vector<TreatmentVector> A = {TreatmentVector({1}), TreatmentVector({-1}),
                                    TreatmentVector({1})};
  Eigen::VectorXd Y(3);
  Y << 1.0, 3.0, 0.0;
  TrialDataset d = dataset_with(X, A, Y);
  TreatmentFreeModel g;
  g.eta = Eigen::VectorXd::Zero(3);
  g.eta[0] = 1.0;  // g(x) = 1 everywhere

  SUBCASE("direct arithmetic including negative weights") {
    Eigen::VectorXd prop(3);
    prop << 0.5, 0.25, 0.5;
    d.propensity = prop;
    const ResidualWeights w = residual_weights(d, g, PropensitySource::known());
    CHECK(w.w[0] == doctest::Approx(0.0));
    CHECK(w.w[1] == doctest::Approx(8.0));
    CHECK(w.w[2] == doctest::Approx(-2.0));
  }
  SUBCASE("cap clips symmetrically") {
    Eigen::VectorXd prop(3);
    prop << 0.5, 0.25, 0.5;
    d.propensity = prop;
    const ResidualWeights w = residual_weights(d, g, PropensitySource::known(), 1.5);
    CHECK(w.w[0] == doctest::Approx(0.0));
    CHECK(w.w[1] == doctest::Approx(1.5));
    CHECK(w.w[2] == doctest::Approx(-1.5));
  }
  SUBCASE("nonpositive propensity raises a positivity error") {
    Eigen::VectorXd prop(3);
    prop << 0.5, 0.0, 0.5;
    d.propensity = prop;
    CHECK_THROWS_AS(residual_weights(d, g, PropensitySource::known()), PositivityError);
  }
  SUBCASE("known source without recorded propensities is rejected") {
    CHECK_THROWS_AS(residual_weights(d, g, PropensitySource::known()), InvalidInputError);
  }
}
