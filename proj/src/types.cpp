#include "mlrwl/types.hpp"

#include <cmath>
#include <string>

namespace mlrwl {

namespace {

void check_entries(const std::vector<int>& entries) {
  if (entries.empty()) throw InvalidInputError("treatment vector must have K >= 1 entries");
  for (int e : entries)
    if (e != -1 && e != 1)
      throw TreatmentCodingError("treatment entries must be -1 or +1, got " + std::to_string(e));
}

}  // namespace

TreatmentVector::TreatmentVector(std::vector<int> entries) {
  check_entries(entries);
  entries_ = std::move(entries);
}

TreatmentVector TreatmentVector::unchecked(std::vector<int> entries) {
  TreatmentVector tv;
  tv.entries_ = std::move(entries);
  return tv;
}

TreatmentVector TreatmentVector::from_code(int code, int k) {
  if (k < 1 || k > 20) throw InvalidInputError("K must be in [1, 20]");
  const int count = 1 << k;
  if (code < 1 || code > count)
    throw InvalidInputError("categorical code " + std::to_string(code) + " outside {1, ..., " +
                            std::to_string(count) + "}");
  std::vector<int> entries(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const int bit = ((code - 1) >> (k - 1 - j)) & 1;
    entries[static_cast<std::size_t>(j)] = bit ? 1 : -1;
  }
  return TreatmentVector(std::move(entries));
}

int TreatmentVector::code() const {
  check_entries(entries_);
  int c = 0;
  for (int e : entries_) c = (c << 1) | (e == 1 ? 1 : 0);
  return c + 1;
}

std::vector<TreatmentVector> enumerate_combinations(int k) {
  if (k < 1 || k > 20) throw InvalidInputError("K must be in [1, 20]");
  const int count = 1 << k;
  std::vector<TreatmentVector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int code = 1; code <= count; ++code) out.push_back(TreatmentVector::from_code(code, k));
  return out;
}

TreatmentVector sign_decision(const Eigen::VectorXd& f_values) {
  if (f_values.size() < 1) throw InvalidInputError("sign_decision: empty input");
  std::vector<int> entries(static_cast<std::size_t>(f_values.size()));
  for (Eigen::Index k = 0; k < f_values.size(); ++k) {
    const double v = f_values[k];
    if (!std::isfinite(v)) throw NonFiniteError("sign_decision: non-finite decision value");
    entries[static_cast<std::size_t>(k)] = v >= 0.0 ? 1 : -1;
  }
  return TreatmentVector(std::move(entries));
}

Eigen::MatrixXd TrialDataset::assignment_matrix() const {
  const int rows = n();
  const int k = num_treatments();
  Eigen::MatrixXd M(rows, k);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < k; ++j) M(i, j) = static_cast<double>(A[static_cast<std::size_t>(i)][j]);
  return M;
}

TrialDataset validate_dataset(TrialDataset raw, int k, int p) {
  const int n = raw.n();
  if (n < 1 || p < 1 || k < 1) throw DimensionMismatchError("dataset requires n >= 1, p >= 1, K >= 1");
  if (raw.p() != p)
    throw DimensionMismatchError("covariate dimension " + std::to_string(raw.p()) +
                                 " does not match expected p=" + std::to_string(p));
  if (static_cast<int>(raw.A.size()) != n)
    throw DimensionMismatchError("treatment count " + std::to_string(raw.A.size()) +
                                 " does not match n=" + std::to_string(n));
  if (static_cast<int>(raw.Y.size()) != n)
    throw DimensionMismatchError("outcome count " + std::to_string(raw.Y.size()) +
                                 " does not match n=" + std::to_string(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j)
      if (!std::isfinite(raw.X(i, j)))
        throw NonFiniteError("non-finite covariate at row " + std::to_string(i));
    if (!std::isfinite(raw.Y[i]))
      throw NonFiniteError("non-finite outcome at row " + std::to_string(i));
    const auto& a = raw.A[static_cast<std::size_t>(i)];
    if (a.size() != k)
      throw DimensionMismatchError("treatment vector at row " + std::to_string(i) + " has length " +
                                   std::to_string(a.size()) + ", expected K=" + std::to_string(k));
    for (int j = 0; j < k; ++j)
      if (a[j] != -1 && a[j] != 1)
        throw TreatmentCodingError("treatment entry not in {-1,+1} at row " + std::to_string(i));
  }
  if (raw.propensity) {
    if (raw.propensity->size() != n)
      throw DimensionMismatchError("propensity count does not match n");
    for (int i = 0; i < n; ++i) {
      const double pr = (*raw.propensity)[i];
      if (!std::isfinite(pr)) throw NonFiniteError("non-finite propensity at row " + std::to_string(i));
      if (!(pr > 0.0))
        throw PositivityError("nonpositive propensity at row " + std::to_string(i) +
                              " violates the positivity assumption");
      if (pr > 1.0)
        throw InvalidInputError("propensity above 1 at row " + std::to_string(i));
    }
  }
  return raw;
}

int DecisionFunctionParams::dim() const {
  return kind == RuleKind::linear ? static_cast<int>(linear_coefs.cols())
                                  : static_cast<int>(train_X.cols());
}

void DecisionFunctionParams::validate() const {
  const int k = num_treatments();
  if (k < 1) throw InvalidInputError("decision function params need K >= 1 intercepts");
  if (kind == RuleKind::linear) {
    if (linear_coefs.rows() != k)
      throw DimensionMismatchError("linear_coefs must have one row per treatment");
    if (dual_coefs.size() != 0)
      throw InvalidInputError("linear params must not carry dual coefficients");
  } else {
    if (dual_coefs.rows() != k)
      throw DimensionMismatchError("dual_coefs must have one row per treatment");
    if (train_X.rows() != dual_coefs.cols())
      throw DimensionMismatchError("stored training covariates do not match dual coefficients");
    if (linear_coefs.size() != 0)
      throw InvalidInputError("kernel params must not carry linear coefficients");
    kernel_spec.validate();
  }
}

Eigen::VectorXd DecisionFunctionParams::decision_values(const Eigen::VectorXd& x) const {
  if (static_cast<int>(x.size()) != dim())
    throw DimensionMismatchError("decision_values: point dimension mismatch");
  return decision_matrix(x.transpose()).row(0);
}

Eigen::MatrixXd DecisionFunctionParams::decision_matrix(const Eigen::MatrixXd& X) const {
  if (static_cast<int>(X.cols()) != dim())
    throw DimensionMismatchError("decision_matrix: covariate dimension mismatch");
  Eigen::MatrixXd F;
  if (kind == RuleKind::linear) {
    F = X * linear_coefs.transpose();
  } else {
    // Chunked so that test-set cross-kernel blocks stay modest.
    const Eigen::Index chunk = 1024;
    F.resize(X.rows(), dual_coefs.rows());
    for (Eigen::Index start = 0; start < X.rows(); start += chunk) {
      const Eigen::Index len = std::min(chunk, X.rows() - start);
      F.middleRows(start, len) =
          cross_kernel(kernel_spec, X.middleRows(start, len), train_X) * dual_coefs.transpose();
    }
  }
  F.rowwise() += intercepts.transpose();
  return F;
}

void FitConfig::validate() const {
  if (!(lambda > 0.0)) throw InvalidInputError("lambda must be positive");
  if (epsilon < 0.0) throw InvalidInputError("epsilon must be positive (or 0 for the default)");
  if (max_iter < 1) throw InvalidInputError("max_iter must be >= 1");
  if (n_restarts < 1) throw InvalidInputError("n_restarts must be >= 1");
  if (!(weight_cap > 0.0)) throw InvalidInputError("weight_cap must be positive");
  if (!(propensity_floor > 0.0 && propensity_floor < 1.0))
    throw InvalidInputError("propensity_floor must lie in (0, 1)");
}

}  // namespace mlrwl
