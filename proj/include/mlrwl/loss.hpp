#pragma once

#include <Eigen/Dense>

#include "mlrwl/types.hpp"

namespace mlrwl {

// T_s(z) = max(s - z_1, ..., s - z_K, 0) for s in {0, 1}.
double t_s(int s, const Eigen::VectorXd& z);

// psi(z) = T_1(z) - T_0(z); bounded in [0, 1], zero iff min z_k >= 1,
// one iff min z_k <= 0.
double psi_loss(const Eigen::VectorXd& z);

// Per-treatment margins z_k = a^(k) f^(k)(x).
Eigen::VectorXd margins(const DecisionFunctionParams& params, const Eigen::VectorXd& x,
                        const TreatmentVector& a);

struct ObjectiveBreakdown {
  double total = 0.0;
  double convex_part = 0.0;   // penalty + positive-weight T_1 + negative-weight T_0
  double concave_part = 0.0;  // the remaining (negated) hinge terms
  double penalty = 0.0;       // (lambda/2) sum_k P(beta_k), already inside convex_part
};

// Penalized empirical objective with its convex/concave split. The kernel
// penalty is the RKHS quadratic form over the params' stored training set.
ObjectiveBreakdown empirical_objective(const DecisionFunctionParams& params,
                                       const TrialDataset& dataset, const ResidualWeights& weights,
                                       double lambda);

namespace detail {

// Split evaluation from a precomputed margin matrix Z (n x K); the DC engine
// reuses this with cached Gram matrices.
ObjectiveBreakdown objective_from_margins(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w,
                                          double penalty_value);

double penalty_value(const DecisionFunctionParams& params, double lambda);

// Compensated (Neumaier) accumulator; keeps descent checks meaningful at
// large n.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

}  // namespace mlrwl
