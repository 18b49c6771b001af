#include "mlrwl/qp.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace mlrwl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max-iter";
    case QpStatus::infeasible: return "infeasible";
  }
  return "?";
}

double KktResiduals::max() const {
  return std::max(std::max(stationarity, primal), std::max(dual, complementarity));
}

void QuadraticProgram::validate() const {
  const int n = m();
  if (n < 1) throw InvalidInputError("qp: empty problem");
  if (P.rows() != n || P.cols() != n) throw DimensionMismatchError("qp: P must be m x m");
  const double pscale = std::max(1.0, P.cwiseAbs().maxCoeff());
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-8 * pscale)
    throw InvalidInputError("qp: P not symmetric within 1e-8");
  if (G.size() > 0 && G.cols() != n) throw DimensionMismatchError("qp: G column count mismatch");
  if (G.rows() != h.size()) throw DimensionMismatchError("qp: G/h row mismatch");
  if (C.size() > 0 && C.cols() != n) throw DimensionMismatchError("qp: C column count mismatch");
  if (C.rows() != d.size()) throw DimensionMismatchError("qp: C/d row mismatch");
  if (lb.size() != 0 && lb.size() != n) throw DimensionMismatchError("qp: lb length mismatch");
  for (Eigen::Index i = 0; i < q.size(); ++i)
    if (!std::isfinite(q[i])) throw NonFiniteError("qp: non-finite q entry");
}

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& P, double jitter) {
  if (P.rows() != P.cols()) throw DimensionMismatchError("project_psd: square matrix required");
  Eigen::MatrixXd sym = 0.5 * (P + P.transpose());
  Eigen::MatrixXd shifted = sym;
  shifted.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() == Eigen::Success) return shifted;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  out = 0.5 * (out + out.transpose());
  out.diagonal().array() += jitter;
  return out;
}

// ---------------------------------------------------------------------------
// Box-form ADMM

struct BoxQpSolver::Impl {
  BoxQp qp;
  BoxSettings st;
  int m = 0, rs = 0, rd = 0, nrows = 0;
  double rho_bar = 0.1;
  Eigen::VectorXd rho, rho_inv;
  std::vector<char> eq_like;
  int refactor_count = 0;
  bool factor_valid = false;

  // dense path
  Eigen::MatrixXd M;
  Eigen::LLT<Eigen::MatrixXd> llt;
  // factored (Woodbury) path
  bool pattern_ready = false;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> dllt;
  Eigen::MatrixXd W, DW;
  Eigen::LLT<Eigen::MatrixXd> core;

  // iterate state (persists across solve() calls for warm starting)
  Eigen::VectorXd x, z, y;

  explicit Impl(BoxQp qp_in, BoxSettings st_in) : qp(std::move(qp_in)), st(st_in) {
    m = qp.m();
    rs = static_cast<int>(qp.A_sparse.rows());
    rd = static_cast<int>(qp.A_dense.rows());
    nrows = rs + rd;
    if (qp.l.size() != nrows || qp.u.size() != nrows)
      throw DimensionMismatchError("box qp: bound length mismatch");
    if (rs > 0 && qp.A_sparse.cols() != m) throw DimensionMismatchError("box qp: A_sparse cols");
    if (rd > 0 && qp.A_dense.cols() != m) throw DimensionMismatchError("box qp: A_dense cols");
    rho_bar = st.rho;
    classify_rows();
    x = Eigen::VectorXd::Zero(m);
    y = Eigen::VectorXd::Zero(nrows);
    z = clamp(a_mul(x));
  }

  void classify_rows() {
    eq_like.assign(static_cast<std::size_t>(nrows), 0);
    for (int j = 0; j < nrows; ++j) {
      const double lj = qp.l[j], uj = qp.u[j];
      if (std::isfinite(lj) && std::isfinite(uj) &&
          uj - lj <= 1e-6 * (1.0 + std::max(std::abs(lj), std::abs(uj))))
        eq_like[static_cast<std::size_t>(j)] = 1;
    }
    rebuild_rho();
  }

  void rebuild_rho() {
    rho.resize(nrows);
    for (int j = 0; j < nrows; ++j)
      rho[j] = std::min(1e6, eq_like[static_cast<std::size_t>(j)] ? rho_bar * st.eq_rho_mult : rho_bar);
    rho_inv = rho.cwiseInverse();
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& v) const {
    return v.cwiseMax(qp.l).cwiseMin(qp.u);
  }

  Eigen::VectorXd a_mul(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out(nrows);
    if (rs > 0) out.head(rs) = qp.A_sparse * v;
    if (rd > 0) out.tail(rd) = qp.A_dense * v;
    return out;
  }

  Eigen::VectorXd at_mul(const Eigen::VectorXd& v) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    if (rs > 0) out += qp.A_sparse.transpose() * v.head(rs);
    if (rd > 0) out += qp.A_dense.transpose() * v.tail(rd);
    return out;
  }

  Eigen::VectorXd p_mul(const Eigen::VectorXd& v) const {
    if (qp.use_factor) return qp.P_factor * (qp.P_factor.transpose() * v);
    return qp.P.selfadjointView<Eigen::Lower>() * v;
  }

  void factorize() {
    if (qp.use_factor) {
      Eigen::SparseMatrix<double> scaled = qp.A_sparse;
      for (int k = 0; k < scaled.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(scaled, k); it; ++it)
          it.valueRef() *= std::sqrt(rho[it.row()]);
      Eigen::SparseMatrix<double> D = (scaled.transpose() * scaled).pruned();
      Eigen::SparseMatrix<double> eye(m, m);
      eye.setIdentity();
      D += st.sigma * eye;
      if (!pattern_ready) {
        dllt.analyzePattern(D);
        pattern_ready = true;
      }
      dllt.factorize(D);
      if (dllt.info() != Eigen::Success) throw NumericError("box qp: sparse KKT factorization failed");
      const int fcols = static_cast<int>(qp.P_factor.cols());
      W.resize(m, fcols + rd);
      if (fcols > 0) W.leftCols(fcols) = qp.P_factor;
      for (int j = 0; j < rd; ++j)
        W.col(fcols + j) = qp.A_dense.row(j).transpose() * std::sqrt(rho[rs + j]);
      if (W.cols() > 0) {
        DW = dllt.solve(W);
        Eigen::MatrixXd core_mat =
            Eigen::MatrixXd::Identity(W.cols(), W.cols()) + W.transpose() * DW;
        core.compute(core_mat);
        if (core.info() != Eigen::Success)
          throw NumericError("box qp: Woodbury core factorization failed");
      }
    } else {
      M = qp.P;
      M.diagonal().array() += st.sigma;
      if (rs > 0) {
        Eigen::SparseMatrix<double> scaled = qp.A_sparse;
        for (int k = 0; k < scaled.outerSize(); ++k)
          for (Eigen::SparseMatrix<double>::InnerIterator it(scaled, k); it; ++it)
            it.valueRef() *= std::sqrt(rho[it.row()]);
        Eigen::SparseMatrix<double> AtA = (scaled.transpose() * scaled).pruned();
        for (int k = 0; k < AtA.outerSize(); ++k)
          for (Eigen::SparseMatrix<double>::InnerIterator it(AtA, k); it; ++it)
            M(it.row(), it.col()) += it.value();
      }
      for (int j = 0; j < rd; ++j)
        M.selfadjointView<Eigen::Lower>().rankUpdate(qp.A_dense.row(j).transpose(), rho[rs + j]);
      llt.compute(M);
      if (llt.info() != Eigen::Success)
        throw NumericError("box qp: KKT factorization failed (P may be indefinite)");
    }
    factor_valid = true;
  }

  Eigen::VectorXd kkt_solve(const Eigen::VectorXd& rhs) const {
    if (!qp.use_factor) return llt.solve(rhs);
    Eigen::VectorXd t = dllt.solve(rhs);
    if (W.cols() == 0) return t;
    return t - DW * core.solve(W.transpose() * t);
  }

  struct Residuals {
    double rp, rd, sp, sd;
  };

  Residuals residuals() const {
    Residuals r{};
    const Eigen::VectorXd ax = a_mul(x);
    const Eigen::VectorXd px = p_mul(x);
    const Eigen::VectorXd aty = at_mul(y);
    r.rp = inf_norm(ax - z);
    r.sp = std::max(inf_norm(ax), inf_norm(z));
    r.rd = inf_norm(px + qp.q + aty);
    r.sd = std::max({inf_norm(px), inf_norm(qp.q), inf_norm(aty)});
    return r;
  }

  bool primal_infeasibility_certificate(const Eigen::VectorXd& dy) const {
    const double ndy = inf_norm(dy);
    if (ndy <= 0.0) return false;
    if (inf_norm(at_mul(dy)) > st.eps_infeas * ndy) return false;
    double support = 0.0;
    for (int j = 0; j < nrows; ++j) {
      const double pos = std::max(dy[j], 0.0);
      const double neg = std::min(dy[j], 0.0);
      if (pos > 0.0) {
        if (!std::isfinite(qp.u[j])) {
          if (pos > st.eps_infeas * ndy) return false;
        } else {
          support += qp.u[j] * pos;
        }
      }
      if (neg < 0.0) {
        if (!std::isfinite(qp.l[j])) {
          if (-neg > st.eps_infeas * ndy) return false;
        } else {
          support += qp.l[j] * neg;
        }
      }
    }
    return support <= -st.eps_infeas * ndy;
  }

  // Active-set refinement seeded by the ADMM multipliers: re-solve the
  // equality-constrained KKT system, drop rows whose multiplier sign is
  // wrong, add rows the trial point violates, repeat. Accepted only when the
  // result beats the splitting iterate.
  bool polish(BoxResult& result) {
    // side per row: 0 free, +1 active at u, -1 active at l, 2 equality-like
    std::vector<int> side(static_cast<std::size_t>(nrows), 0);
    {
      const Eigen::VectorXd ax = a_mul(x);
      const double width = 10.0 * st.eps_abs + 1e-9;
      for (int j = 0; j < nrows; ++j) {
        if (eq_like[static_cast<std::size_t>(j)]) {
          side[static_cast<std::size_t>(j)] = 2;
        } else if (y[j] > 0.0 && std::isfinite(qp.u[j])) {
          side[static_cast<std::size_t>(j)] = 1;
        } else if (y[j] < 0.0 && std::isfinite(qp.l[j])) {
          side[static_cast<std::size_t>(j)] = -1;
        } else if (std::isfinite(qp.u[j]) && qp.u[j] - ax[j] <= width) {
          side[static_cast<std::size_t>(j)] = 1;
        } else if (std::isfinite(qp.l[j]) && ax[j] - qp.l[j] <= width) {
          side[static_cast<std::size_t>(j)] = -1;
        }
      }
    }

    Eigen::MatrixXd Pfull =
        qp.use_factor ? Eigen::MatrixXd(qp.P_factor * qp.P_factor.transpose()) : qp.P;
    const double reg = 1e-9 * std::max(1.0, Pfull.diagonal().cwiseAbs().maxCoeff());
    const double sign_tol = 1e-8 * (1.0 + inf_norm(y));

    Eigen::VectorXd xp, yp;
    for (int round = 0; round < 12; ++round) {
      std::vector<int> act;
      for (int j = 0; j < nrows; ++j)
        if (side[static_cast<std::size_t>(j)] != 0) act.push_back(j);
      const int na = static_cast<int>(act.size());
      if (m + na > st.polish_size_cap) return false;

      Eigen::MatrixXd Aact(na, m);
      Eigen::VectorXd bact(na);
      for (int r = 0; r < na; ++r) {
        const int j = act[static_cast<std::size_t>(r)];
        Aact.row(r) = j < rs ? Eigen::RowVectorXd(qp.A_sparse.row(j)) : qp.A_dense.row(j - rs);
        const int sd = side[static_cast<std::size_t>(j)];
        bact[r] = sd == 2 ? 0.5 * (qp.l[j] + qp.u[j]) : (sd > 0 ? qp.u[j] : qp.l[j]);
      }
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + na, m + na);
      kkt.topLeftCorner(m, m) = Pfull;
      kkt.topLeftCorner(m, m).diagonal().array() += reg;
      if (na > 0) {
        kkt.topRightCorner(m, na) = Aact.transpose();
        kkt.bottomLeftCorner(na, m) = Aact;
        kkt.bottomRightCorner(na, na).diagonal().array() -= reg;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(kkt);
      if (ldlt.info() != Eigen::Success) return false;
      Eigen::VectorXd rhs(m + na);
      rhs.head(m) = -qp.q;
      rhs.tail(na) = bact;
      Eigen::VectorXd sol = ldlt.solve(rhs);
      for (int it = 0; it < 2; ++it) {
        Eigen::VectorXd resid(m + na);
        resid.head(m) = -qp.q - Pfull.selfadjointView<Eigen::Lower>() * sol.head(m);
        if (na > 0) {
          resid.head(m) -= Aact.transpose() * sol.tail(na);
          resid.tail(na) = bact - Aact * sol.head(m);
        }
        sol += ldlt.solve(resid);
      }
      xp = sol.head(m);
      yp = Eigen::VectorXd::Zero(nrows);
      for (int r = 0; r < na; ++r) yp[act[static_cast<std::size_t>(r)]] = sol[m + r];

      bool changed = false;
      for (int r = 0; r < na; ++r) {
        const int j = act[static_cast<std::size_t>(r)];
        const int sd = side[static_cast<std::size_t>(j)];
        if ((sd == 1 && yp[j] < -sign_tol) || (sd == -1 && yp[j] > sign_tol)) {
          side[static_cast<std::size_t>(j)] = 0;
          changed = true;
        }
      }
      const Eigen::VectorXd axp = a_mul(xp);
      const double viol_tol = 1e-10 * (1.0 + inf_norm(axp));
      for (int j = 0; j < nrows; ++j) {
        if (side[static_cast<std::size_t>(j)] != 0) continue;
        if (std::isfinite(qp.u[j]) && axp[j] > qp.u[j] + viol_tol) {
          side[static_cast<std::size_t>(j)] = 1;
          changed = true;
        } else if (std::isfinite(qp.l[j]) && axp[j] < qp.l[j] - viol_tol) {
          side[static_cast<std::size_t>(j)] = -1;
          changed = true;
        }
      }
      if (!changed) break;
      if (round == 11) return false;  // did not settle
    }

    const Eigen::VectorXd axp = a_mul(xp);
    double prim = 0.0, dual = 0.0;
    for (int j = 0; j < nrows; ++j) {
      prim = std::max(prim, std::max(qp.l[j] - axp[j], axp[j] - qp.u[j]));
      if (!eq_like[static_cast<std::size_t>(j)]) {
        if (yp[j] > 0.0 && !std::isfinite(qp.u[j])) dual = std::max(dual, yp[j]);
        if (yp[j] < 0.0 && !std::isfinite(qp.l[j])) dual = std::max(dual, -yp[j]);
        if (side[static_cast<std::size_t>(j)] == 1) dual = std::max(dual, -yp[j]);
        if (side[static_cast<std::size_t>(j)] == -1) dual = std::max(dual, yp[j]);
      }
    }
    const Eigen::VectorXd station =
        Pfull.selfadjointView<Eigen::Lower>() * xp + qp.q + at_mul(yp);
    const double stat = inf_norm(station);
    const Residuals cur = residuals();
    const double tol_p = st.eps_abs + st.eps_rel * std::max(inf_norm(axp), 1.0);
    const double tol_d = st.eps_abs + st.eps_rel * std::max(inf_norm(qp.q), 1.0);
    if (prim <= std::max(tol_p, cur.rp) && stat <= std::max(tol_d, cur.rd) && dual <= tol_d) {
      x = xp;
      z = clamp(axp);
      y = yp;
      result.polished = true;
      return true;
    }
    return false;
  }

  BoxResult solve() {
    if (!factor_valid) factorize();
    BoxResult result;
    Eigen::VectorXd y_checkpoint = y;
    int iter = 0;
    bool converged = false;
    for (iter = 1; iter <= st.max_iter; ++iter) {
      const Eigen::VectorXd rhs = st.sigma * x - qp.q + at_mul(rho.cwiseProduct(z) - y);
      const Eigen::VectorXd xt = kkt_solve(rhs);
      const Eigen::VectorXd zt = a_mul(xt);
      const Eigen::VectorXd x_next = st.alpha * xt + (1.0 - st.alpha) * x;
      const Eigen::VectorXd z_relax = st.alpha * zt + (1.0 - st.alpha) * z;
      const Eigen::VectorXd v = z_relax + rho_inv.cwiseProduct(y);
      const Eigen::VectorXd z_next = clamp(v);
      y += rho.cwiseProduct(z_relax - z_next);
      x = x_next;
      z = z_next;

      if (iter % st.check_every == 0 || iter == st.max_iter) {
        const Residuals r = residuals();
        const double eps_p = st.eps_abs + st.eps_rel * r.sp;
        const double eps_d = st.eps_abs + st.eps_rel * r.sd;
        if (r.rp <= eps_p && r.rd <= eps_d) {
          converged = true;
          break;
        }
        const Eigen::VectorXd dy = y - y_checkpoint;
        y_checkpoint = y;
        if (primal_infeasibility_certificate(dy)) {
          result.status = QpStatus::infeasible;
          result.iterations = iter;
          result.x = x;
          result.z = z;
          result.y = y;
          result.primal_residual = r.rp;
          result.dual_residual = r.rd;
          return result;
        }
        if (st.adaptive_rho && refactor_count < st.max_refactor) {
          const double num = r.rp / std::max(r.sp, 1e-12);
          const double den = r.rd / std::max(r.sd, 1e-12);
          const double ratio = std::sqrt(num / std::max(den, 1e-16));
          if (ratio > 5.0 || ratio < 0.2) {
            rho_bar = std::clamp(rho_bar * ratio, 1e-6, 1e6);
            rebuild_rho();
            ++refactor_count;
            factorize();
          }
        }
      }
    }
    result.iterations = std::min(iter, st.max_iter);
    const Residuals fin = residuals();
    result.primal_residual = fin.rp;
    result.dual_residual = fin.rd;
    result.status = converged ? QpStatus::optimal : QpStatus::max_iter;
    if (converged && st.polish) polish(result);
    result.x = x;
    result.z = z;
    result.y = y;
    return result;
  }
};

BoxQpSolver::BoxQpSolver(BoxQp qp, BoxSettings settings)
    : impl_(std::make_unique<Impl>(std::move(qp), settings)) {}
BoxQpSolver::~BoxQpSolver() = default;
BoxQpSolver::BoxQpSolver(BoxQpSolver&&) noexcept = default;

void BoxQpSolver::update_q(const Eigen::VectorXd& q) {
  if (q.size() != impl_->m) throw DimensionMismatchError("update_q: length mismatch");
  impl_->qp.q = q;
}

void BoxQpSolver::update_bounds(const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  if (l.size() != impl_->nrows || u.size() != impl_->nrows)
    throw DimensionMismatchError("update_bounds: length mismatch");
  impl_->qp.l = l;
  impl_->qp.u = u;
}

void BoxQpSolver::warm_start(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != impl_->m || y.size() != impl_->nrows)
    throw DimensionMismatchError("warm_start: length mismatch");
  impl_->x = x;
  impl_->y = y;
  impl_->z = impl_->clamp(impl_->a_mul(x));
}

BoxResult BoxQpSolver::solve() { return impl_->solve(); }

const BoxQp& BoxQpSolver::problem() const { return impl_->qp; }

// ---------------------------------------------------------------------------
// General interface

namespace {

KktResiduals qp_residuals(const QuadraticProgram& prob, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& mu, const Eigen::VectorXd& nu,
                          const Eigen::VectorXd& bound_mu) {
  KktResiduals res;
  Eigen::VectorXd grad = prob.P.selfadjointView<Eigen::Lower>() * x + prob.q;
  if (prob.G.rows() > 0) grad += prob.G.transpose() * mu;
  if (prob.C.rows() > 0) grad += prob.C.transpose() * nu;
  if (prob.lb.size() > 0) grad += bound_mu;
  res.stationarity = inf_norm(grad);

  double prim = 0.0, dual = 0.0, comp = 0.0;
  if (prob.G.rows() > 0) {
    const Eigen::VectorXd slack = prob.h - prob.G * x;
    prim = std::max(prim, -slack.minCoeff());
    dual = std::max(dual, -mu.minCoeff());
    comp = std::max(comp, mu.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  if (prob.C.rows() > 0) prim = std::max(prim, (prob.C * x - prob.d).cwiseAbs().maxCoeff());
  if (prob.lb.size() > 0) {
    for (int i = 0; i < prob.m(); ++i) {
      if (!std::isfinite(prob.lb[i])) continue;
      prim = std::max(prim, prob.lb[i] - x[i]);
      dual = std::max(dual, bound_mu[i]);  // should be <= 0
      comp = std::max(comp, std::abs(bound_mu[i] * (x[i] - prob.lb[i])));
    }
  }
  res.primal = std::max(0.0, prim);
  res.dual = std::max(0.0, dual);
  res.complementarity = comp;
  return res;
}

double qp_objective(const QuadraticProgram& prob, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(prob.P.selfadjointView<Eigen::Lower>() * x) + prob.q.dot(x);
}

// Exhaustive active-set search for small problems: every subset of the
// inequality rows is tried as the active set and the best feasible KKT
// point wins.
std::optional<QpSolution> enumerate_small(const QuadraticProgram& prob, double tol) {
  const int m = prob.m();
  const int r = static_cast<int>(prob.G.rows());
  const int s = static_cast<int>(prob.C.rows());
  std::vector<int> bound_rows;
  if (prob.lb.size() > 0)
    for (int i = 0; i < m; ++i)
      if (std::isfinite(prob.lb[i])) bound_rows.push_back(i);
  const int fb = static_cast<int>(bound_rows.size());
  const int total_ineq = r + fb;
  if (m > 14 || total_ineq > 16 || s > 8) return std::nullopt;

  auto ineq_row = [&](int j) -> Eigen::RowVectorXd {
    if (j < r) return prob.G.row(j);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(m);
    row[bound_rows[static_cast<std::size_t>(j - r)]] = -1.0;
    return row;
  };
  auto ineq_rhs = [&](int j) -> double {
    return j < r ? prob.h[j] : -prob.lb[bound_rows[static_cast<std::size_t>(j - r)]];
  };

  double best_obj = kInf;
  Eigen::VectorXd best_x, best_mu_full;
  bool found = false;

  for (std::uint32_t mask = 0; mask < (1u << total_ineq); ++mask) {
    std::vector<int> act;
    for (int j = 0; j < total_ineq; ++j)
      if (mask & (1u << j)) act.push_back(j);
    const int na = static_cast<int>(act.size());
    if (na + s > m + 2) continue;
    const int dim = m + s + na;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs(dim);
    kkt.topLeftCorner(m, m) = prob.P;
    rhs.head(m) = -prob.q;
    if (s > 0) {
      kkt.block(m, 0, s, m) = prob.C;
      kkt.block(0, m, m, s) = prob.C.transpose();
      rhs.segment(m, s) = prob.d;
    }
    for (int a = 0; a < na; ++a) {
      const Eigen::RowVectorXd row = ineq_row(act[static_cast<std::size_t>(a)]);
      kkt.block(m + s + a, 0, 1, m) = row;
      kkt.block(0, m + s + a, m, 1) = row.transpose();
      rhs[m + s + a] = ineq_rhs(act[static_cast<std::size_t>(a)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    const Eigen::VectorXd sol = lu.solve(rhs);
    if ((kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff()))
      continue;
    const Eigen::VectorXd x = sol.head(m);
    bool ok = true;
    for (int j = 0; j < total_ineq && ok; ++j)
      if (ineq_row(j).dot(x) > ineq_rhs(j) + 1e-8 * (1.0 + std::abs(ineq_rhs(j)))) ok = false;
    for (int a = 0; a < na && ok; ++a)
      if (sol[m + s + a] < -1e-8) ok = false;
    if (!ok) continue;
    const double obj = qp_objective(prob, x);
    if (obj < best_obj - 1e-12) {
      best_obj = obj;
      best_x = x;
      best_mu_full = Eigen::VectorXd::Zero(total_ineq);
      for (int a = 0; a < na; ++a)
        best_mu_full[act[static_cast<std::size_t>(a)]] = sol[m + s + a];
      found = true;
    }
  }
  if (!found) {
    QpSolution sol;
    sol.status = QpStatus::infeasible;
    sol.x = Eigen::VectorXd::Zero(m);
    return sol;
  }

  QpSolution sol;
  sol.status = QpStatus::optimal;
  sol.x = best_x;
  sol.mu = best_mu_full.head(r);
  sol.bound_mu = Eigen::VectorXd::Zero(prob.lb.size() > 0 ? m : 0);
  for (int j = 0; j < fb; ++j)
    sol.bound_mu[bound_rows[static_cast<std::size_t>(j)]] = -best_mu_full[r + j];
  // recover equality multipliers from stationarity (least squares)
  if (s > 0) {
    Eigen::VectorXd resid = -(prob.P.selfadjointView<Eigen::Lower>() * best_x + prob.q);
    if (r > 0) resid -= prob.G.transpose() * sol.mu;
    if (sol.bound_mu.size() > 0) resid -= sol.bound_mu;
    sol.nu = prob.C.transpose().colPivHouseholderQr().solve(resid);
  } else {
    sol.nu = Eigen::VectorXd::Zero(0);
  }
  sol.primal_objective = best_obj;
  Eigen::VectorXd bm = sol.bound_mu.size() > 0 ? sol.bound_mu : Eigen::VectorXd::Zero(m);
  sol.kkt = qp_residuals(prob, sol.x, sol.mu, sol.nu, bm);
  (void)tol;
  return sol;
}

}  // namespace

QpSolution solve_qp(const QuadraticProgram& problem, double tol, int max_iter,
                    const Eigen::VectorXd* x0) {
  problem.validate();
  if (!(tol > 0.0)) throw InvalidInputError("solve_qp: tol must be positive");
  if (max_iter < 1) throw InvalidInputError("solve_qp: max_iter must be >= 1");
  const int m = problem.m();
  const int r = static_cast<int>(problem.G.rows());
  const int s = static_cast<int>(problem.C.rows());

  {
    const double pscale = std::max(1.0, problem.P.cwiseAbs().maxCoeff());
    Eigen::MatrixXd probe = problem.P;
    probe.diagonal().array() += 1e-6 * pscale;
    Eigen::LLT<Eigen::MatrixXd> psd_probe(probe);
    if (psd_probe.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (problem.P + problem.P.transpose()));
      if (es.eigenvalues().minCoeff() < -1e-6 * pscale)
        throw InvalidInputError("solve_qp: P is not positive semidefinite beyond tolerance");
    }
  }

  std::vector<int> bound_rows;
  if (problem.lb.size() > 0)
    for (int i = 0; i < m; ++i)
      if (std::isfinite(problem.lb[i])) bound_rows.push_back(i);
  const int fb = static_cast<int>(bound_rows.size());

  BoxQp box;
  box.P = project_psd(problem.P, default_jitter(problem.P));
  box.q = problem.q;
  const int nrows = r + s + fb;
  std::vector<Eigen::Triplet<double>> trips;
  box.l.resize(nrows);
  box.u.resize(nrows);
  for (int j = 0; j < r; ++j) {
    for (int c = 0; c < m; ++c)
      if (problem.G(j, c) != 0.0) trips.emplace_back(j, c, problem.G(j, c));
    box.l[j] = -kInf;
    box.u[j] = problem.h[j];
  }
  for (int j = 0; j < s; ++j) {
    for (int c = 0; c < m; ++c)
      if (problem.C(j, c) != 0.0) trips.emplace_back(r + j, c, problem.C(j, c));
    box.l[r + j] = problem.d[j];
    box.u[r + j] = problem.d[j];
  }
  for (int j = 0; j < fb; ++j) {
    const int i = bound_rows[static_cast<std::size_t>(j)];
    trips.emplace_back(r + s + j, i, 1.0);
    box.l[r + s + j] = problem.lb[i];
    box.u[r + s + j] = kInf;
  }
  box.A_sparse.resize(nrows, m);
  box.A_sparse.setFromTriplets(trips.begin(), trips.end());

  BoxSettings st;
  st.eps_abs = tol;
  st.eps_rel = tol;
  st.max_iter = max_iter;

  QpSolution sol;
  try {
    BoxQpSolver solver(std::move(box), st);
    if (x0 != nullptr && x0->size() == m)
      solver.warm_start(*x0, Eigen::VectorXd::Zero(nrows));
    BoxResult br = solver.solve();
    sol.x = br.x;
    sol.iterations = br.iterations;
    sol.polished = br.polished;
    sol.status = br.status;
    sol.mu = br.y.head(r);
    sol.nu = br.y.segment(r, s);
    sol.bound_mu = Eigen::VectorXd::Zero(problem.lb.size() > 0 ? m : 0);
    for (int j = 0; j < fb; ++j)
      sol.bound_mu[bound_rows[static_cast<std::size_t>(j)]] = br.y[r + s + j];
  } catch (const NumericError&) {
    // Indefinite beyond the jitter tolerance: report as invalid input per the
    // contract, but only after a definitive eigenvalue check.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (problem.P + problem.P.transpose()));
    const double scale = std::max(1.0, problem.P.cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-6 * scale)
      throw InvalidInputError("solve_qp: P is not positive semidefinite beyond tolerance");
    throw;
  }

  if (sol.mu.size() > 0) sol.mu = sol.mu.cwiseMax(0.0);
  Eigen::VectorXd bm = sol.bound_mu.size() > 0 ? sol.bound_mu : Eigen::VectorXd::Zero(m);
  sol.kkt = qp_residuals(problem, sol.x, sol.mu, sol.nu, bm);
  sol.primal_objective = qp_objective(problem, sol.x);

  // Residual certificate for the optimal claim; an exact small-problem
  // search backs up the splitting iteration whenever it stalls or returns an
  // unpolished point.
  const double scale = 1.0 + std::max({inf_norm(problem.q), inf_norm(problem.h), inf_norm(problem.d)});
  const bool certified =
      sol.status == QpStatus::optimal && sol.polished && sol.kkt.max() <= tol * scale * 10.0;
  if (sol.status != QpStatus::infeasible && !certified) {
    if (auto exact = enumerate_small(problem, tol)) {
      if (exact->status == QpStatus::optimal &&
          (sol.status != QpStatus::optimal ||
           exact->primal_objective <= sol.primal_objective + tol * scale))
        return *exact;
      if (exact->status != QpStatus::optimal && sol.status != QpStatus::optimal) return *exact;
    }
    if (sol.status == QpStatus::optimal && sol.kkt.max() > tol * scale * 10.0)
      sol.status = QpStatus::max_iter;
  }
  return sol;
}

}  // namespace mlrwl
