#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>

#include "mlrwl/errors.hpp"

namespace mlrwl {

// Dense convex QP
//   min 1/2 x'Px + q'x   s.t.  Gx <= h,  Cx = d,  x >= lb (entrywise, -inf ok)
struct QuadraticProgram {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::MatrixXd C;
  Eigen::VectorXd d;
  Eigen::VectorXd lb;  // empty means unbounded below

  int m() const { return static_cast<int>(q.size()); }
  void validate() const;
};

enum class QpStatus { optimal, max_iter, infeasible };
const char* to_string(QpStatus s);

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  double max() const;
};

struct QpSolution {
  Eigen::VectorXd x;
  QpStatus status = QpStatus::max_iter;
  double primal_objective = 0.0;
  KktResiduals kkt;
  Eigen::VectorXd mu;        // inequality multipliers, >= 0 at optimal
  Eigen::VectorXd nu;        // equality multipliers
  Eigen::VectorXd bound_mu;  // lower-bound multipliers, <= 0 at optimal
  int iterations = 0;
  bool polished = false;
};

// Operator-splitting solver with over-relaxation on the KKT system, plus a
// solution polish step; an active-set enumeration fallback covers small
// problems when the splitting iteration stalls.
QpSolution solve_qp(const QuadraticProgram& problem, double tol = 1e-7, int max_iter = 20000,
                    const Eigen::VectorXd* x0 = nullptr);

// P + jitter*I when the smallest eigenvalue is >= -jitter; otherwise clips
// negative eigenvalues to zero before adding the jitter.
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& P, double jitter);

inline double default_jitter(const Eigen::MatrixXd& P) {
  return P.rows() == 0 ? 0.0 : 1e-9 * std::max(0.0, P.trace()) / static_cast<double>(P.rows());
}

// ---------------------------------------------------------------------------
// Box form used internally and by the DC engine:
//   min 1/2 x'Px + q'x   s.t.  l <= A x <= u
// A is split into sparse rows and (few) dense rows stacked below them.
// P may be given as a thin factor F with P = F F', which switches the KKT
// solve to a Woodbury path with no large factorization.
struct BoxQp {
  Eigen::MatrixXd P;
  Eigen::MatrixXd P_factor;
  bool use_factor = false;
  Eigen::VectorXd q;
  Eigen::SparseMatrix<double> A_sparse;
  Eigen::MatrixXd A_dense;
  Eigen::VectorXd l, u;

  int m() const { return static_cast<int>(q.size()); }
  int rows() const { return static_cast<int>(A_sparse.rows() + A_dense.rows()); }
};

struct BoxSettings {
  double sigma = 1e-6;
  double rho = 0.1;
  double alpha = 1.6;
  double eps_abs = 1e-7;
  double eps_rel = 1e-7;
  int max_iter = 20000;
  int check_every = 25;
  bool adaptive_rho = true;
  int max_refactor = 6;
  double eq_rho_mult = 1e3;
  double eps_infeas = 1e-9;
  bool polish = true;
  int polish_size_cap = 3000;
};

struct BoxResult {
  Eigen::VectorXd x, z, y;
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
};

class BoxQpSolver {
 public:
  BoxQpSolver(BoxQp qp, BoxSettings settings);
  ~BoxQpSolver();
  BoxQpSolver(BoxQpSolver&&) noexcept;

  void update_q(const Eigen::VectorXd& q);
  // Row widths may change but a row must stay on the same side of the
  // equality-like threshold chosen at construction.
  void update_bounds(const Eigen::VectorXd& l, const Eigen::VectorXd& u);
  void warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

  BoxResult solve();

  const BoxQp& problem() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace mlrwl
