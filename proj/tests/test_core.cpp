#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <set>

#include "mlrwl/rng.hpp"
#include "mlrwl/types.hpp"

using namespace mlrwl;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double x : vals) v[i++] = x;
  return v;
}

TrialDataset small_dataset() {
  TrialDataset d;
  d.X.resize(3, 2);
  d.X << 0.1, 0.2, -0.3, 0.4, 0.5, -0.6;
  d.A = {TreatmentVector({1, -1}), TreatmentVector({-1, -1}), TreatmentVector({1, 1})};
  d.Y = vec({1.0, -2.0, 0.5});
  return d;
}

}  // namespace

TEST_CASE("sign_decision strict signs and zero tie-break") {
  CHECK(sign_decision(vec({2.0, -0.5})) == TreatmentVector({1, -1}));
  CHECK(sign_decision(vec({0.0, 0.0})) == TreatmentVector({1, 1}));
  CHECK(sign_decision(vec({-1e-9, 1e-9})) == TreatmentVector({-1, 1}));
  CHECK_THROWS_AS(sign_decision(vec({std::numeric_limits<double>::quiet_NaN()})), NonFiniteError);
  CHECK_THROWS_AS(sign_decision(Eigen::VectorXd()), InvalidInputError);
}

TEST_CASE("sign_decision invariant under positive scaling") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng.uniform_int(0, 4));
    Eigen::VectorXd f(k);
    for (int j = 0; j < k; ++j) f[j] = rng.uniform(-3.0, 3.0);
    const double c = std::exp(rng.uniform(-5.0, 5.0));
    CHECK(sign_decision(f) == sign_decision(c * f));
  }
}

TEST_CASE("enumerate_combinations lexicographic order") {
  const auto k1 = enumerate_combinations(1);
  REQUIRE(k1.size() == 2);
  CHECK(k1[0] == TreatmentVector({-1}));
  CHECK(k1[1] == TreatmentVector({1}));

  const auto k2 = enumerate_combinations(2);
  REQUIRE(k2.size() == 4);
  CHECK(k2[0] == TreatmentVector({-1, -1}));
  CHECK(k2[1] == TreatmentVector({-1, 1}));
  CHECK(k2[2] == TreatmentVector({1, -1}));
  CHECK(k2[3] == TreatmentVector({1, 1}));

  const auto k3 = enumerate_combinations(3);
  REQUIRE(k3.size() == 8);
  CHECK(k3.front() == TreatmentVector({-1, -1, -1}));
  CHECK(k3.back() == TreatmentVector({1, 1, 1}));

  CHECK_THROWS_AS(enumerate_combinations(0), InvalidInputError);
  CHECK_THROWS_AS(enumerate_combinations(21), InvalidInputError);
}

TEST_CASE("categorical coding is a bijection") {
  for (int k = 1; k <= 6; ++k) {
    const auto combos = enumerate_combinations(k);
    CHECK(static_cast<int>(combos.size()) == (1 << k));
    std::set<int> codes;
    for (int j = 0; j < static_cast<int>(combos.size()); ++j) {
      const int code = combos[static_cast<std::size_t>(j)].code();
      CHECK(code == j + 1);
      codes.insert(code);
      CHECK(TreatmentVector::from_code(code, k) == combos[static_cast<std::size_t>(j)]);
    }
    CHECK(static_cast<int>(codes.size()) == (1 << k));
  }
}

TEST_CASE("validate_dataset passes well-formed data unchanged") {
  const TrialDataset d = small_dataset();
  const TrialDataset out = validate_dataset(d, 2, 2);
  CHECK(out.X == d.X);
  CHECK(out.Y == d.Y);
  CHECK(out.A == d.A);
}

TEST_CASE("validate_dataset diagnostics name the offending row") {
  TrialDataset bad_a = small_dataset();
  bad_a.A[1] = TreatmentVector::unchecked({0, -1});
  CHECK_THROWS_WITH_AS(validate_dataset(bad_a, 2, 2), doctest::Contains("row 1"),
                       TreatmentCodingError);

  TrialDataset bad_prob = small_dataset();
  bad_prob.propensity = vec({0.5, 0.25, 0.0});
  CHECK_THROWS_WITH_AS(validate_dataset(bad_prob, 2, 2), doctest::Contains("row 2"),
                       PositivityError);

  TrialDataset bad_dim = small_dataset();
  CHECK_THROWS_AS(validate_dataset(bad_dim, 2, 5), DimensionMismatchError);
  CHECK_THROWS_AS(validate_dataset(bad_dim, 3, 2), DimensionMismatchError);

  TrialDataset bad_y = small_dataset();
  bad_y.Y[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_WITH_AS(validate_dataset(bad_y, 2, 2), doctest::Contains("row 0"), NonFiniteError);
}

TEST_CASE("treatment vector construction rejects bad entries") {
  CHECK_THROWS_AS(TreatmentVector({1, 0}), TreatmentCodingError);
  CHECK_THROWS_AS(TreatmentVector(std::vector<int>{}), InvalidInputError);
  CHECK_THROWS_AS(TreatmentVector::from_code(0, 2), InvalidInputError);
  CHECK_THROWS_AS(TreatmentVector::from_code(5, 2), InvalidInputError);
}
