#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mlrwl/kernels.hpp"
#include "mlrwl/qp.hpp"
#include "mlrwl/types.hpp"

namespace mlrwl {

// Per-sample active coefficients of the concave-part subgradient:
// grad_{beta_k} L_cave = sum_i c_ik * grad_{beta_k} f^(k)(x_i) and
// grad_{beta_0k} L_cave = sum_i c_ik. At most one k is active per sample.
struct ConcaveSubgradient {
  Eigen::MatrixXd c;  // n x K

  Eigen::VectorXd intercept_gradient() const { return c.colwise().sum(); }
};

struct DualSolution {
  Eigen::MatrixXd theta;  // n x K Lagrange multipliers, >= 0
  double gamma = 0.0;
};

ConcaveSubgradient concave_subgradient(const DecisionFunctionParams& params,
                                       const TrialDataset& dataset,
                                       const ResidualWeights& weights);

// Dual of the per-iteration subproblem, over theta in R^{nK} (index k*n + i).
// The intercept stationarity equalities enter as two-sided inequalities with
// a small slack to tolerate rounding in the concave-part gradient.
QuadraticProgram assemble_dual_linear(const TrialDataset& dataset, const ResidualWeights& weights,
                                      const ConcaveSubgradient& subgrad, double gamma);

// Same dual with inner products replaced by Gram entries.
QuadraticProgram assemble_dual_kernel(const Eigen::MatrixXd& gram, const TrialDataset& dataset,
                                      const ResidualWeights& weights,
                                      const ConcaveSubgradient& subgrad, double gamma);

// KKT recovery: beta_1k = sum_i theta_ik a_i^k x_i - gamma grad_k, intercepts
// averaged over support points, with an interval-midpoint fallback when the
// support is empty.
DecisionFunctionParams recover_primal_linear(const DualSolution& dual, const TrialDataset& dataset,
                                             const ResidualWeights& weights,
                                             const ConcaveSubgradient& subgrad, double gamma);

DecisionFunctionParams recover_primal_kernel(const DualSolution& dual, const TrialDataset& dataset,
                                             const Eigen::MatrixXd& gram_raw,
                                             const KernelSpec& spec, const ResidualWeights& weights,
                                             const ConcaveSubgradient& subgrad, double gamma);

struct FitDiagnostics {
  std::vector<double> objective_trace;  // accepted iterates of the selected restart
  int iterations = 0;
  int restart_index = 0;
  bool converged = false;
  bool descent_ok = true;
  double max_ascent = 0.0;
  double final_objective = 0.0;
  std::vector<double> restart_final_objectives;
  double gamma = 0.0;
  double kernel_bandwidth = 0.0;  // kernel rules only
  DualSolution dual;              // final subproblem's multipliers
  Eigen::VectorXd dual_balance_target;  // gamma * intercept gradient per k at that subproblem
};

struct FitResult {
  DecisionFunctionParams params;
  FitDiagnostics diagnostics;
};

// Difference-of-convex outer loop: linearize the concave part, solve the
// convex dual QP, recover the primal, stop when parameter movement falls
// below epsilon or T iterations elapse. Restart 0 starts at zero; further
// restarts draw coefficients uniformly from (-0.1, 0.1); the restart with the
// lowest final objective wins.
FitResult dc_fit(const TrialDataset& dataset, const ResidualWeights& weights,
                 const FitConfig& config, RuleKind kind,
                 std::optional<KernelSpec> kernel = std::nullopt);

}  // namespace mlrwl
