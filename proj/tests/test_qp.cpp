#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <limits>
#include <optional>

#include "mlrwl/qp.hpp"
#include "mlrwl/rng.hpp"

using namespace mlrwl;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Independent brute-force oracle: enumerate every active set, solve the
// bordered KKT system, keep the best feasible point with nonnegative
// multipliers.
struct OracleResult {
  Eigen::VectorXd x;
  double objective = kInf;
  bool found = false;
};

OracleResult brute_force_qp(const QuadraticProgram& qp) {
  const int m = qp.m();
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  for (Eigen::Index j = 0; j < qp.G.rows(); ++j) {
    rows.push_back(qp.G.row(j));
    rhs.push_back(qp.h[j]);
  }
  if (qp.lb.size() > 0)
    for (int i = 0; i < m; ++i)
      if (std::isfinite(qp.lb[i])) {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(m);
        r[i] = -1.0;
        rows.push_back(r);
        rhs.push_back(-qp.lb[i]);
      }
  const int ni = static_cast<int>(rows.size());
  const int s = static_cast<int>(qp.C.rows());
  REQUIRE(ni <= 20);

  OracleResult best;
  for (std::uint32_t mask = 0; mask < (1u << ni); ++mask) {
    std::vector<int> act;
    for (int j = 0; j < ni; ++j)
      if (mask & (1u << j)) act.push_back(j);
    const int na = static_cast<int>(act.size());
    const int dim = m + s + na;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b(dim);
    kkt.topLeftCorner(m, m) = qp.P;
    b.head(m) = -qp.q;
    for (int e = 0; e < s; ++e) {
      kkt.row(m + e).head(m) = qp.C.row(e);
      kkt.col(m + e).head(m) = qp.C.row(e).transpose();
      b[m + e] = qp.d[e];
    }
    for (int a = 0; a < na; ++a) {
      kkt.row(m + s + a).head(m) = rows[static_cast<std::size_t>(act[static_cast<std::size_t>(a)])];
      kkt.col(m + s + a).head(m) =
          rows[static_cast<std::size_t>(act[static_cast<std::size_t>(a)])].transpose();
      b[m + s + a] = rhs[static_cast<std::size_t>(act[static_cast<std::size_t>(a)])];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> solver(kkt);
    if (solver.rank() < dim) continue;
    const Eigen::VectorXd sol = solver.solve(b);
    const Eigen::VectorXd x = sol.head(m);
    bool feasible = true;
    for (int j = 0; j < ni && feasible; ++j)
      if (rows[static_cast<std::size_t>(j)].dot(x) > rhs[static_cast<std::size_t>(j)] + 1e-9)
        feasible = false;
    for (int a = 0; a < na && feasible; ++a)
      if (sol[m + s + a] < -1e-9) feasible = false;
    if (s > 0 && (qp.C * x - qp.d).cwiseAbs().maxCoeff() > 1e-9) feasible = false;
    if (!feasible) continue;
    const double obj = 0.5 * x.dot(qp.P * x) + qp.q.dot(x);
    if (obj < best.objective) {
      best.objective = obj;
      best.x = x;
      best.found = true;
    }
  }
  return best;
}

QuadraticProgram random_strictly_convex_qp(Rng& rng, int max_m = 10, int max_r = 10, int max_s = 3) {
  const int m = 1 + static_cast<int>(rng.uniform_int(0, static_cast<std::uint64_t>(max_m - 1)));
  const int r = static_cast<int>(rng.uniform_int(0, static_cast<std::uint64_t>(max_r)));
  const int s = static_cast<int>(rng.uniform_int(0, static_cast<std::uint64_t>(std::min(max_s, m - 1 >= 0 ? max_s : 0))));
  QuadraticProgram qp;
  Eigen::MatrixXd R(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) R(i, j) = rng.uniform(-1.0, 1.0);
  qp.P = R * R.transpose() + (0.3 + rng.uniform01()) * Eigen::MatrixXd::Identity(m, m);
  qp.q.resize(m);
  for (int i = 0; i < m; ++i) qp.q[i] = rng.uniform(-2.0, 2.0);
  Eigen::VectorXd x0(m);
  for (int i = 0; i < m; ++i) x0[i] = rng.uniform(-1.0, 1.0);
  qp.G.resize(r, m);
  qp.h.resize(r);
  for (int j = 0; j < r; ++j) {
    for (int c = 0; c < m; ++c) qp.G(j, c) = rng.uniform(-1.0, 1.0);
    qp.h[j] = qp.G.row(j).dot(x0) + rng.uniform(0.05, 1.5);
  }
  qp.C.resize(s, m);
  qp.d.resize(s);
  for (int e = 0; e < s; ++e) {
    for (int c = 0; c < m; ++c) qp.C(e, c) = rng.uniform(-1.0, 1.0);
    qp.d[e] = qp.C.row(e).dot(x0);
  }
  if (rng.uniform01() < 0.5) {
    qp.lb.resize(m);
    for (int i = 0; i < m; ++i)
      qp.lb[i] = rng.uniform01() < 0.5 ? -kInf : x0[i] - rng.uniform(0.05, 2.0);
  }
  return qp;
}

}  // namespace

TEST_CASE("analytic examples") {
  SUBCASE("min x^2/2 subject to x >= 1") {
    QuadraticProgram qp;
    qp.P = Eigen::MatrixXd::Identity(1, 1);
    qp.q = Eigen::VectorXd::Zero(1);
    qp.lb = Eigen::VectorXd::Constant(1, 1.0);
    const QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.primal_objective == doctest::Approx(0.5).epsilon(1e-7));
  }
  SUBCASE("symmetric equality projection") {
    QuadraticProgram qp;
    qp.P = Eigen::MatrixXd::Identity(2, 2);
    qp.q = Eigen::VectorXd::Zero(2);
    qp.C.resize(1, 2);
    qp.C << 1.0, 1.0;
    qp.d = Eigen::VectorXd::Constant(1, 2.0);
    const QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(sol.primal_objective == doctest::Approx(1.0).epsilon(1e-7));
  }
  SUBCASE("box-constrained separable problem") {
    QuadraticProgram qp;
    qp.P = Eigen::MatrixXd::Identity(2, 2);
    qp.q.resize(2);
    qp.q << -1.0, -2.0;
    qp.G = Eigen::MatrixXd::Identity(2, 2);
    qp.h = Eigen::VectorXd::Ones(2);
    qp.lb = Eigen::VectorXd::Zero(2);
    const QpSolution sol = solve_qp(qp);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(sol.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.x[1] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("oracle equivalence on random strictly convex QPs") {
  Rng rng(2024);
  int tested = 0;
  while (tested < 200) {
    const QuadraticProgram qp = random_strictly_convex_qp(rng);
    const OracleResult oracle = brute_force_qp(qp);
    if (!oracle.found) continue;  // should not happen: x0 is feasible
    ++tested;
    const QpSolution sol = solve_qp(qp, 1e-7, 20000);
    REQUIRE(sol.status == QpStatus::optimal);
    CHECK(std::abs(sol.primal_objective - oracle.objective) < 1e-6);
    CHECK((sol.x - oracle.x).norm() < 1e-5);
  }
}

TEST_CASE("scaling invariance of the argmin") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const QuadraticProgram qp = random_strictly_convex_qp(rng, 6, 6, 2);
    QuadraticProgram scaled = qp;
    const double c = std::exp(rng.uniform(-2.0, 3.0));
    scaled.P *= c;
    scaled.q *= c;
    const QpSolution a = solve_qp(qp);
    const QpSolution b = solve_qp(scaled);
    REQUIRE(a.status == QpStatus::optimal);
    REQUIRE(b.status == QpStatus::optimal);
    CHECK((a.x - b.x).norm() < 1e-6 * (1.0 + a.x.norm()));
  }
}

TEST_CASE("complementary slackness and KKT certificate at optimal") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const QuadraticProgram qp = random_strictly_convex_qp(rng, 8, 8, 2);
    const QpSolution sol = solve_qp(qp, 1e-7);
    REQUIRE(sol.status == QpStatus::optimal);
    const double scale = 1.0 + qp.q.cwiseAbs().maxCoeff();
    CHECK(sol.kkt.stationarity <= 1e-6 * scale);
    CHECK(sol.kkt.primal <= 1e-6 * scale);
    CHECK(sol.kkt.dual <= 1e-7 * scale);
    if (qp.G.rows() > 0) {
      const Eigen::VectorXd slack = qp.h - qp.G * sol.x;
      for (Eigen::Index j = 0; j < slack.size(); ++j)
        CHECK(sol.mu[j] * slack[j] <= 1e-6 * scale);
    }
  }
}

TEST_CASE("infeasible problem is reported") {
  QuadraticProgram qp;
  qp.P = Eigen::MatrixXd::Identity(1, 1);
  qp.q = Eigen::VectorXd::Zero(1);
  qp.G.resize(1, 1);
  qp.G << 1.0;
  qp.h = Eigen::VectorXd::Constant(1, -1.0);  // x <= -1
  qp.lb = Eigen::VectorXd::Constant(1, 1.0);  // x >= 1
  const QpSolution sol = solve_qp(qp, 1e-7, 20000);
  CHECK(sol.status == QpStatus::infeasible);
}

TEST_CASE("indefinite P rejected") {
  QuadraticProgram qp;
  qp.P = Eigen::MatrixXd::Identity(2, 2);
  qp.P(1, 1) = -1.0;
  qp.q = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(solve_qp(qp), InvalidInputError);

  QuadraticProgram asym;
  asym.P.resize(2, 2);
  asym.P << 1.0, 0.5, -0.5, 1.0;
  asym.q = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(solve_qp(asym), InvalidInputError);
}

TEST_CASE("project_psd branches") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
  CHECK(project_psd(I, 0.0).isApprox(I));

  Eigen::MatrixXd nearly = Eigen::MatrixXd::Zero(2, 2);
  nearly(0, 0) = 1.0;
  nearly(1, 1) = -1e-12;
  const Eigen::MatrixXd out = project_psd(nearly, 1e-10);
  CHECK(out(0, 0) == doctest::Approx(1.0 + 1e-10));
  CHECK(out(1, 1) == doctest::Approx(1e-10).epsilon(0.05));

  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd S(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) S(i, j) = rng.uniform(-1.0, 1.0);
    S = 0.5 * (S + S.transpose()).eval();
    const Eigen::MatrixXd proj = project_psd(S, 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(proj);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("warm start accepted") {
  QuadraticProgram qp;
  qp.P = Eigen::MatrixXd::Identity(2, 2);
  qp.q.resize(2);
  qp.q << -3.0, 1.0;
  qp.lb = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd x0(2);
  x0 << 3.0, 0.0;
  const QpSolution sol = solve_qp(qp, 1e-7, 20000, &x0);
  REQUIRE(sol.status == QpStatus::optimal);
  CHECK(sol.x[0] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(sol.x[1] == doctest::Approx(0.0).epsilon(1e-6));
}
