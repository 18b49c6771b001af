#include "mlrwl/loss.hpp"

#include <cmath>
#include <string>

#include "mlrwl/kernels.hpp"

namespace mlrwl {

double t_s(int s, const Eigen::VectorXd& z) {
  if (s != 0 && s != 1) throw InvalidInputError("t_s: s must be 0 or 1");
  if (z.size() < 1) throw InvalidInputError("t_s: empty margin vector");
  double best = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (!std::isfinite(z[k])) throw NonFiniteError("t_s: non-finite margin");
    best = std::max(best, static_cast<double>(s) - z[k]);
  }
  return best;
}

double psi_loss(const Eigen::VectorXd& z) {
  // T_1 - T_0 simplified exactly: both maxima are attained at the smallest
  // margin, so the difference collapses to a clamp of 1 - min z. Evaluating
  // the subtraction directly would leak one-ulp violations of the [0, 1]
  // bounds.
  if (z.size() < 1) throw InvalidInputError("psi_loss: empty margin vector");
  double zmin = z[0];
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (!std::isfinite(z[k])) throw NonFiniteError("psi_loss: non-finite margin");
    zmin = std::min(zmin, z[k]);
  }
  if (zmin <= 0.0) return 1.0;
  if (zmin >= 1.0) return 0.0;
  return 1.0 - zmin;
}

Eigen::VectorXd margins(const DecisionFunctionParams& params, const Eigen::VectorXd& x,
                        const TreatmentVector& a) {
  params.validate();
  if (a.size() != params.num_treatments())
    throw DimensionMismatchError("margins: treatment vector length does not match params");
  const Eigen::VectorXd f = params.decision_values(x);
  Eigen::VectorXd z(f.size());
  for (Eigen::Index k = 0; k < f.size(); ++k) z[k] = static_cast<double>(a[static_cast<int>(k)]) * f[k];
  return z;
}

namespace detail {

ObjectiveBreakdown objective_from_margins(const Eigen::MatrixXd& Z, const Eigen::VectorXd& w,
                                          double penalty_value) {
  if (Z.rows() != w.size())
    throw DimensionMismatchError("objective: weight count does not match margin rows");
  CompensatedSum convex, concave;
  for (Eigen::Index i = 0; i < Z.rows(); ++i) {
    double t1 = 0.0, t0 = 0.0;
    for (Eigen::Index k = 0; k < Z.cols(); ++k) {
      const double z = Z(i, k);
      t1 = std::max(t1, 1.0 - z);
      t0 = std::max(t0, -z);
    }
    const double aw = std::abs(w[i]);
    if (w[i] >= 0.0) {
      convex.add(aw * t1);
      concave.add(-aw * t0);
    } else {
      convex.add(aw * t0);
      concave.add(-aw * t1);
    }
  }
  ObjectiveBreakdown out;
  out.penalty = penalty_value;
  out.convex_part = penalty_value + convex.value();
  out.concave_part = concave.value();
  out.total = out.convex_part + out.concave_part;
  if (!std::isfinite(out.total))
    throw NumericError("objective: non-finite value (penalty=" + std::to_string(penalty_value) + ")");
  return out;
}

double penalty_value(const DecisionFunctionParams& params, double lambda) {
  double sum = 0.0;
  if (params.kind == RuleKind::linear) {
    sum = params.linear_coefs.squaredNorm();
  } else {
    const Eigen::MatrixXd K = gram_matrix(params.kernel_spec, params.train_X);
    for (Eigen::Index k = 0; k < params.dual_coefs.rows(); ++k) {
      const Eigen::VectorXd b = params.dual_coefs.row(k);
      sum += b.dot(K * b);
    }
  }
  return 0.5 * lambda * sum;
}

}  // namespace detail

ObjectiveBreakdown empirical_objective(const DecisionFunctionParams& params,
                                       const TrialDataset& dataset, const ResidualWeights& weights,
                                       double lambda) {
  params.validate();
  if (!(lambda > 0.0)) throw InvalidInputError("empirical_objective: lambda must be positive");
  if (weights.w.size() != dataset.n())
    throw DimensionMismatchError("empirical_objective: weight count does not match dataset");
  if (dataset.num_treatments() != params.num_treatments())
    throw DimensionMismatchError("empirical_objective: K mismatch between dataset and params");
  const Eigen::MatrixXd F = params.decision_matrix(dataset.X);
  const Eigen::MatrixXd Z = dataset.assignment_matrix().cwiseProduct(F);
  return detail::objective_from_margins(Z, weights.w, detail::penalty_value(params, lambda));
}

}  // namespace mlrwl
