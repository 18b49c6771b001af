#include "mlrwl/dc.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "mlrwl/loss.hpp"
#include "mlrwl/rng.hpp"

namespace mlrwl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd margins_matrix(const DecisionFunctionParams& params, const TrialDataset& dataset) {
  return dataset.assignment_matrix().cwiseProduct(params.decision_matrix(dataset.X));
}

// Shared structure of the Eq. 11/13 duals. theta is indexed k*n + i.
struct DualPieces {
  int n = 0, k = 0;
  Eigen::MatrixXd Asgn;       // n x K
  Eigen::VectorXd box;        // gamma |w_i| sum caps
  Eigen::VectorXd indicator;  // 1(w_i >= 0)
  Eigen::VectorXd g0;         // intercept gradients, per k
  Eigen::MatrixXd Gc;         // n x K, (G c_k)_i
  double gamma = 0.0;

  Eigen::VectorXd linear_term() const {
    Eigen::VectorXd q(static_cast<Eigen::Index>(n) * k);
    for (int kk = 0; kk < k; ++kk)
      for (int i = 0; i < n; ++i)
        q[kk * n + i] = -gamma * Asgn(i, kk) * Gc(i, kk) - indicator[i];
    return q;
  }

  double eq_tol(int kk) const { return 1e-7 * (1.0 + std::abs(gamma * g0[kk])); }
};

DualPieces dual_pieces(const TrialDataset& dataset, const ResidualWeights& weights,
                       const ConcaveSubgradient& subgrad, double gamma,
                       const Eigen::MatrixXd* gram, const Eigen::MatrixXd* X) {
  if (!(gamma > 0.0)) throw InvalidInputError("dual assembly: gamma must be positive");
  DualPieces d;
  d.n = dataset.n();
  d.k = dataset.num_treatments();
  if (weights.w.size() != d.n) throw DimensionMismatchError("dual assembly: weight length mismatch");
  if (subgrad.c.rows() != d.n || subgrad.c.cols() != d.k)
    throw DimensionMismatchError("dual assembly: subgradient shape mismatch");
  d.Asgn = dataset.assignment_matrix();
  d.box = gamma * weights.w.cwiseAbs();
  d.indicator.resize(d.n);
  for (int i = 0; i < d.n; ++i) d.indicator[i] = weights.w[i] >= 0.0 ? 1.0 : 0.0;
  d.g0 = subgrad.intercept_gradient();
  d.gamma = gamma;
  if (gram != nullptr) {
    if (gram->rows() != d.n || gram->cols() != d.n)
      throw DimensionMismatchError("dual assembly: gram size mismatch");
    d.Gc = *gram * subgrad.c;
  } else {
    d.Gc = *X * (X->transpose() * subgrad.c);
  }
  return d;
}

QuadraticProgram dual_to_program(const DualPieces& d, const Eigen::MatrixXd* gram,
                                 const Eigen::MatrixXd* X) {
  const int n = d.n, k = d.k, m = n * k;
  QuadraticProgram qp;
  qp.P = Eigen::MatrixXd::Zero(m, m);
  for (int kk = 0; kk < k; ++kk) {
    const Eigen::VectorXd a = d.Asgn.col(kk);
    if (gram != nullptr) {
      qp.P.block(kk * n, kk * n, n, n) = a.asDiagonal() * (*gram) * a.asDiagonal();
    } else {
      const Eigen::MatrixXd ax = a.asDiagonal() * (*X);
      qp.P.block(kk * n, kk * n, n, n) = ax * ax.transpose();
    }
  }
  qp.q = d.linear_term();
  qp.G = Eigen::MatrixXd::Zero(n + 2 * k, m);
  qp.h = Eigen::VectorXd::Zero(n + 2 * k);
  for (int i = 0; i < n; ++i) {
    for (int kk = 0; kk < k; ++kk) qp.G(i, kk * n + i) = 1.0;
    qp.h[i] = d.box[i];
  }
  for (int kk = 0; kk < k; ++kk) {
    const double rhs = d.gamma * d.g0[kk];
    const double tol = d.eq_tol(kk);
    for (int i = 0; i < n; ++i) {
      qp.G(n + 2 * kk, kk * n + i) = d.Asgn(i, kk);
      qp.G(n + 2 * kk + 1, kk * n + i) = -d.Asgn(i, kk);
    }
    qp.h[n + 2 * kk] = rhs + tol;
    qp.h[n + 2 * kk + 1] = -(rhs - tol);
  }
  qp.lb = Eigen::VectorXd::Zero(m);
  return qp;
}

// Box form used by the fit loop: sparse sum-cap and nonnegativity rows,
// dense intercept-balance rows.
BoxQp dual_to_box(const DualPieces& d, const Eigen::MatrixXd* gram_qp, const Eigen::MatrixXd* X) {
  const int n = d.n, k = d.k, m = n * k;
  BoxQp box;
  box.q = d.linear_term();
  if (gram_qp != nullptr) {
    box.P = Eigen::MatrixXd::Zero(m, m);
    for (int kk = 0; kk < k; ++kk)
      box.P.block(kk * n, kk * n, n, n) =
          d.Asgn.col(kk).asDiagonal() * (*gram_qp) * d.Asgn.col(kk).asDiagonal();
  } else {
    const int p = static_cast<int>(X->cols());
    box.P_factor = Eigen::MatrixXd::Zero(m, k * p);
    for (int kk = 0; kk < k; ++kk)
      box.P_factor.block(kk * n, kk * p, n, p) = d.Asgn.col(kk).asDiagonal() * (*X);
    box.use_factor = true;
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) * k + static_cast<std::size_t>(m));
  box.l.resize(n + m + k);
  box.u.resize(n + m + k);
  for (int i = 0; i < n; ++i) {
    for (int kk = 0; kk < k; ++kk) trips.emplace_back(i, kk * n + i, 1.0);
    box.l[i] = -kInf;
    box.u[i] = d.box[i];
  }
  for (int j = 0; j < m; ++j) {
    trips.emplace_back(n + j, j, 1.0);
    box.l[n + j] = 0.0;
    box.u[n + j] = kInf;
  }
  box.A_sparse.resize(n + m, m);
  box.A_sparse.setFromTriplets(trips.begin(), trips.end());
  box.A_dense = Eigen::MatrixXd::Zero(k, m);
  for (int kk = 0; kk < k; ++kk) {
    box.A_dense.block(kk, kk * n, 1, n) = d.Asgn.col(kk).transpose();
    const double rhs = d.gamma * d.g0[kk];
    const double tol = d.eq_tol(kk);
    box.l[n + m + kk] = rhs - tol;
    box.u[n + m + kk] = rhs + tol;
  }
  return box;
}

void eq_bounds_update(const DualPieces& d, Eigen::VectorXd& l, Eigen::VectorXd& u) {
  const int n = d.n, k = d.k, m = n * k;
  for (int kk = 0; kk < k; ++kk) {
    const double rhs = d.gamma * d.g0[kk];
    const double tol = d.eq_tol(kk);
    l[n + m + kk] = rhs - tol;
    u[n + m + kk] = rhs + tol;
  }
}

// Intercepts from complementary slackness: mean over interior support points,
// otherwise the midpoint of the interval the inactive constraints leave open.
Eigen::VectorXd recover_intercepts(const DualSolution& dual, const TrialDataset& dataset,
                                   const ResidualWeights& weights,
                                   const Eigen::MatrixXd& f_wo_intercept) {
  const int n = dataset.n();
  const int k = dataset.num_treatments();
  const Eigen::VectorXd absw = weights.w.cwiseAbs();
  const double maxw = n > 0 ? absw.maxCoeff() : 0.0;
  const double tol_theta = 1e-5 * dual.gamma * maxw;
  const double tol_mu = tol_theta;
  const Eigen::MatrixXd Asgn = dataset.assignment_matrix();
  const Eigen::VectorXd row_sums = dual.theta.rowwise().sum();
  Eigen::VectorXd b0 = Eigen::VectorXd::Zero(k);
  for (int kk = 0; kk < k; ++kk) {
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
      const double slack = dual.gamma * absw[i] - row_sums[i];
      if (dual.theta(i, kk) > tol_theta && slack > tol_mu) {
        const double s = weights.w[i] >= 0.0 ? 1.0 : 0.0;
        acc += s * Asgn(i, kk) - f_wo_intercept(i, kk);
        ++count;
      }
    }
    if (count > 0) {
      b0[kk] = acc / count;
      continue;
    }
    double lo = -kInf, hi = kInf;
    for (int i = 0; i < n; ++i) {
      const double slack = dual.gamma * absw[i] - row_sums[i];
      if (!(slack > tol_mu) || dual.theta(i, kk) > tol_theta) continue;
      // eta_i = 0 with an inactive margin row: s_i - a(f + b0) <= 0 must hold
      const double s = weights.w[i] >= 0.0 ? 1.0 : 0.0;
      if (Asgn(i, kk) > 0)
        lo = std::max(lo, s - f_wo_intercept(i, kk));
      else
        hi = std::min(hi, -s - f_wo_intercept(i, kk));
    }
    if (std::isfinite(lo) && std::isfinite(hi))
      b0[kk] = 0.5 * (lo + hi);
    else if (std::isfinite(lo))
      b0[kk] = lo;
    else if (std::isfinite(hi))
      b0[kk] = hi;
    else
      b0[kk] = 0.0;
  }
  return b0;
}

}  // namespace

ConcaveSubgradient concave_subgradient(const DecisionFunctionParams& params,
                                       const TrialDataset& dataset,
                                       const ResidualWeights& weights) {
  if (weights.w.size() != dataset.n())
    throw DimensionMismatchError("concave_subgradient: weight length mismatch");
  const Eigen::MatrixXd Z = margins_matrix(params, dataset);
  const int n = dataset.n();
  const int k = dataset.num_treatments();
  ConcaveSubgradient out;
  out.c = Eigen::MatrixXd::Zero(n, k);
  for (int i = 0; i < n; ++i) {
    int kstar = 0;
    for (int kk = 1; kk < k; ++kk)
      if (Z(i, kk) < Z(i, kstar)) kstar = kk;  // ties keep the smallest index
    const double z = Z(i, kstar);
    const double w = weights.w[i];
    const bool active = w >= 0.0 ? (z < 0.0) : (1.0 - z > 0.0);
    if (active && w != 0.0)
      out.c(i, kstar) =
          std::abs(w) * static_cast<double>(dataset.A[static_cast<std::size_t>(i)][kstar]);
  }
  return out;
}

QuadraticProgram assemble_dual_linear(const TrialDataset& dataset, const ResidualWeights& weights,
                                      const ConcaveSubgradient& subgrad, double gamma) {
  const DualPieces d = dual_pieces(dataset, weights, subgrad, gamma, nullptr, &dataset.X);
  return dual_to_program(d, nullptr, &dataset.X);
}

QuadraticProgram assemble_dual_kernel(const Eigen::MatrixXd& gram, const TrialDataset& dataset,
                                      const ResidualWeights& weights,
                                      const ConcaveSubgradient& subgrad, double gamma) {
  const DualPieces d = dual_pieces(dataset, weights, subgrad, gamma, &gram, nullptr);
  return dual_to_program(d, &gram, nullptr);
}

DecisionFunctionParams recover_primal_linear(const DualSolution& dual, const TrialDataset& dataset,
                                             const ResidualWeights& weights,
                                             const ConcaveSubgradient& subgrad, double gamma) {
  const int n = dataset.n();
  const int k = dataset.num_treatments();
  const int p = dataset.p();
  if (dual.theta.rows() != n || dual.theta.cols() != k)
    throw DimensionMismatchError("recover_primal_linear: theta shape mismatch");
  DecisionFunctionParams params;
  params.kind = RuleKind::linear;
  params.linear_coefs.resize(k, p);
  const Eigen::MatrixXd Asgn = dataset.assignment_matrix();
  for (int kk = 0; kk < k; ++kk) {
    const Eigen::VectorXd coef =
        dual.theta.col(kk).cwiseProduct(Asgn.col(kk)) - gamma * subgrad.c.col(kk);
    params.linear_coefs.row(kk) = (dataset.X.transpose() * coef).transpose();
  }
  const Eigen::MatrixXd f_wo_b0 = dataset.X * params.linear_coefs.transpose();
  params.intercepts = recover_intercepts(dual, dataset, weights, f_wo_b0);
  return params;
}

DecisionFunctionParams recover_primal_kernel(const DualSolution& dual, const TrialDataset& dataset,
                                             const Eigen::MatrixXd& gram_raw,
                                             const KernelSpec& spec,
                                             const ResidualWeights& weights,
                                             const ConcaveSubgradient& subgrad, double gamma) {
  const int n = dataset.n();
  const int k = dataset.num_treatments();
  if (dual.theta.rows() != n || dual.theta.cols() != k)
    throw DimensionMismatchError("recover_primal_kernel: theta shape mismatch");
  DecisionFunctionParams params;
  params.kind = RuleKind::kernel;
  params.kernel_spec = spec;
  params.train_X = dataset.X;
  params.dual_coefs.resize(k, n);
  const Eigen::MatrixXd Asgn = dataset.assignment_matrix();
  for (int kk = 0; kk < k; ++kk)
    params.dual_coefs.row(kk) =
        (dual.theta.col(kk).cwiseProduct(Asgn.col(kk)) - gamma * subgrad.c.col(kk)).transpose();
  const Eigen::MatrixXd f_wo_b0 = gram_raw * params.dual_coefs.transpose();
  params.intercepts = recover_intercepts(dual, dataset, weights, f_wo_b0);
  return params;
}

namespace {

struct RestartOutcome {
  DecisionFunctionParams params;
  std::vector<double> trace;
  bool converged = false;
  int iterations = 0;
  double max_ascent = 0.0;
  DualSolution dual;
  Eigen::VectorXd dual_target;
};

DecisionFunctionParams initial_params(const TrialDataset& dataset, RuleKind kind,
                                      const KernelSpec& spec, int restart, std::uint64_t seed) {
  const int n = dataset.n();
  const int k = dataset.num_treatments();
  const int p = dataset.p();
  DecisionFunctionParams params;
  params.kind = kind;
  params.intercepts = Eigen::VectorXd::Zero(k);
  if (kind == RuleKind::linear) {
    params.linear_coefs = Eigen::MatrixXd::Zero(k, p);
  } else {
    params.dual_coefs = Eigen::MatrixXd::Zero(k, n);
    params.kernel_spec = spec;
    params.train_X = dataset.X;
  }
  if (restart > 0) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(restart)));
    for (int kk = 0; kk < k; ++kk) {
      params.intercepts[kk] = rng.uniform(-0.1, 0.1);
      if (kind == RuleKind::linear)
        for (int j = 0; j < p; ++j) params.linear_coefs(kk, j) = rng.uniform(-0.1, 0.1);
      else
        for (int i = 0; i < n; ++i) params.dual_coefs(kk, i) = rng.uniform(-0.1, 0.1);
    }
  }
  return params;
}

double param_delta(const DecisionFunctionParams& a, const DecisionFunctionParams& b) {
  double sum = 0.0;
  const int k = a.num_treatments();
  for (int kk = 0; kk < k; ++kk) {
    double sq = (a.intercepts[kk] - b.intercepts[kk]) * (a.intercepts[kk] - b.intercepts[kk]);
    if (a.kind == RuleKind::linear)
      sq += (a.linear_coefs.row(kk) - b.linear_coefs.row(kk)).squaredNorm();
    else
      sq += (a.dual_coefs.row(kk) - b.dual_coefs.row(kk)).squaredNorm();
    sum += std::sqrt(sq);
  }
  return sum;
}

}  // namespace

FitResult dc_fit(const TrialDataset& dataset, const ResidualWeights& weights,
                 const FitConfig& config, RuleKind kind, std::optional<KernelSpec> kernel) {
  config.validate();
  const int n = dataset.n();
  const int k = dataset.num_treatments();
  if (weights.w.size() != n) throw DimensionMismatchError("dc_fit: weight length mismatch");
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(weights.w[i])) throw NonFiniteError("dc_fit: non-finite weight");
  const double gamma = 2.0 / config.lambda;
  const double eps = config.effective_epsilon(k);

  KernelSpec spec;
  Eigen::MatrixXd gram_raw, gram_qp;
  const bool is_kernel = kind == RuleKind::kernel;
  if (is_kernel) {
    spec = kernel.value_or(KernelSpec{KernelSpec::Kind::rbf, median_bandwidth(dataset.X)});
    spec.validate();
    gram_raw = gram_matrix(spec, dataset.X);
    gram_qp = project_psd(gram_raw, default_jitter(gram_raw));
  }

  const Eigen::MatrixXd Asgn = dataset.assignment_matrix();

  auto objective = [&](const DecisionFunctionParams& params) -> double {
    const Eigen::MatrixXd F = is_kernel
                                  ? Eigen::MatrixXd((gram_raw * params.dual_coefs.transpose())
                                                        .rowwise() +
                                                    params.intercepts.transpose())
                                  : Eigen::MatrixXd((dataset.X * params.linear_coefs.transpose())
                                                        .rowwise() +
                                                    params.intercepts.transpose());
    const Eigen::MatrixXd Z = Asgn.cwiseProduct(F);
    double pen;
    if (is_kernel) {
      double sum = 0.0;
      for (int kk = 0; kk < k; ++kk) {
        const Eigen::VectorXd b = params.dual_coefs.row(kk);
        sum += b.dot(gram_raw * b);
      }
      pen = 0.5 * config.lambda * sum;
    } else {
      pen = 0.5 * config.lambda * params.linear_coefs.squaredNorm();
    }
    return detail::objective_from_margins(Z, weights.w, pen).total;
  };

  BoxSettings inner;
  inner.eps_abs = 2e-5;
  inner.eps_rel = 1e-5;
  inner.max_iter = 20000;
  inner.polish = false;

  std::vector<RestartOutcome> outcomes;
  outcomes.reserve(static_cast<std::size_t>(config.n_restarts));

  for (int restart = 0; restart < config.n_restarts; ++restart) {
    DecisionFunctionParams params = initial_params(dataset, kind, spec, restart, config.rng_seed);
    double obj = objective(params);
    RestartOutcome outcome;
    outcome.trace.push_back(obj);
    outcome.params = params;

    std::unique_ptr<BoxQpSolver> solver;
    Eigen::VectorXd box_l, box_u;
    bool warm = false;
    Eigen::VectorXd prev_x, prev_y;

    for (int t = 1; t <= config.max_iter; ++t) {
      const ConcaveSubgradient sub = concave_subgradient(params, dataset, weights);
      const DualPieces pieces = dual_pieces(dataset, weights, sub, gamma,
                                            is_kernel ? &gram_qp : nullptr,
                                            is_kernel ? nullptr : &dataset.X);
      if (!solver) {
        BoxQp box =
            dual_to_box(pieces, is_kernel ? &gram_qp : nullptr, is_kernel ? nullptr : &dataset.X);
        box_l = box.l;
        box_u = box.u;
        solver = std::make_unique<BoxQpSolver>(std::move(box), inner);
      } else {
        eq_bounds_update(pieces, box_l, box_u);
        solver->update_bounds(box_l, box_u);
        solver->update_q(pieces.linear_term());
      }
      if (warm) solver->warm_start(prev_x, prev_y);
      BoxResult inner_result = solver->solve();
      if (inner_result.status == QpStatus::infeasible)
        throw FitError("dc_fit: dual subproblem infeasible at iteration " + std::to_string(t));
      if (inner_result.status != QpStatus::optimal &&
          inner_result.primal_residual > 1e-3 * (1.0 + pieces.box.maxCoeff()))
        throw FitError("dc_fit: dual subproblem failed at iteration " + std::to_string(t) +
                       " (status " + std::string(to_string(inner_result.status)) + ")");
      prev_x = inner_result.x;
      prev_y = inner_result.y;
      warm = true;

      DualSolution dual;
      dual.gamma = gamma;
      dual.theta.resize(n, k);
      for (int kk = 0; kk < k; ++kk) dual.theta.col(kk) = inner_result.x.segment(kk * n, n);
      dual.theta = dual.theta.cwiseMax(0.0);

      DecisionFunctionParams next =
          is_kernel ? recover_primal_kernel(dual, dataset, gram_raw, spec, weights, sub, gamma)
                    : recover_primal_linear(dual, dataset, weights, sub, gamma);

      const double obj_next = objective(next);
      outcome.iterations = t;
      if (obj_next > obj + 1e-12 * (1.0 + std::abs(obj))) {
        // Inexact subproblem produced a non-descent step; keep the previous
        // iterate and stop.
        outcome.max_ascent = std::max(outcome.max_ascent, obj_next - obj);
        outcome.converged = true;
        break;
      }
      const double delta = param_delta(next, params);
      params = next;
      obj = obj_next;
      outcome.trace.push_back(obj);
      outcome.params = params;
      outcome.dual = dual;
      outcome.dual_target = gamma * pieces.g0;
      if (delta <= eps) {
        outcome.converged = true;
        break;
      }
    }
    outcomes.push_back(std::move(outcome));
  }

  int best = 0;
  for (int r = 1; r < static_cast<int>(outcomes.size()); ++r)
    if (outcomes[static_cast<std::size_t>(r)].trace.back() <
        outcomes[static_cast<std::size_t>(best)].trace.back())
      best = r;

  RestartOutcome& chosen = outcomes[static_cast<std::size_t>(best)];
  FitResult result;
  result.params = std::move(chosen.params);
  FitDiagnostics& diag = result.diagnostics;
  diag.objective_trace = chosen.trace;
  diag.iterations = chosen.iterations;
  diag.restart_index = best;
  diag.converged = chosen.converged;
  diag.final_objective = chosen.trace.back();
  diag.max_ascent = chosen.max_ascent;
  diag.descent_ok = true;
  for (std::size_t i = 1; i < chosen.trace.size(); ++i)
    if (chosen.trace[i] > chosen.trace[i - 1] + 1e-7) diag.descent_ok = false;
  for (const auto& o : outcomes) diag.restart_final_objectives.push_back(o.trace.back());
  diag.gamma = gamma;
  diag.kernel_bandwidth = is_kernel ? spec.bandwidth : 0.0;
  diag.dual = std::move(chosen.dual);
  diag.dual_balance_target = std::move(chosen.dual_target);
  return result;
}

}  // namespace mlrwl
