#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mlrwl/errors.hpp"
#include "mlrwl/kernels.hpp"

namespace mlrwl {

// A point in {-1,+1}^K: which of the K single treatments are assigned.
class TreatmentVector {
 public:
  TreatmentVector() = default;
  explicit TreatmentVector(std::vector<int> entries);

  // Skips the +/-1 check; used by readers so that validate_dataset can
  // report coding errors with a row index instead of failing mid-parse.
  static TreatmentVector unchecked(std::vector<int> entries);

  // Inverse of code(): categorical codes {1, ..., 2^K} enumerate the
  // combinations lexicographically with -1 before +1.
  static TreatmentVector from_code(int code, int k);

  int code() const;
  int size() const { return static_cast<int>(entries_.size()); }
  int operator[](int k) const { return entries_[static_cast<std::size_t>(k)]; }
  const std::vector<int>& entries() const { return entries_; }
  bool operator==(const TreatmentVector& o) const = default;

 private:
  std::vector<int> entries_;
};

std::vector<TreatmentVector> enumerate_combinations(int k);

// sign map: +1 on f > 0, -1 on f < 0, +1 at exactly 0 (documented tie-break).
TreatmentVector sign_decision(const Eigen::VectorXd& f_values);

struct TrialDataset {
  Eigen::MatrixXd X;  // n x p covariates
  std::vector<TreatmentVector> A;
  Eigen::VectorXd Y;  // larger is better
  std::optional<Eigen::VectorXd> propensity;  // P(A_i | X_i), in (0, 1]

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
  int num_treatments() const { return A.empty() ? 0 : A.front().size(); }

  // n x K matrix of +/-1 entries, the vector form of A.
  Eigen::MatrixXd assignment_matrix() const;
};

TrialDataset validate_dataset(TrialDataset raw, int k, int p);

struct ResidualWeights {
  Eigen::VectorXd w;  // signed; negative weights are first-class
};

enum class RuleKind { linear, kernel };

// Parameters of the K decision functions f^(k).
struct DecisionFunctionParams {
  RuleKind kind = RuleKind::linear;
  Eigen::VectorXd intercepts;    // K
  Eigen::MatrixXd linear_coefs;  // K x p, linear kind only
  Eigen::MatrixXd dual_coefs;    // K x n_train, kernel kind only
  KernelSpec kernel_spec;        // kernel kind only
  Eigen::MatrixXd train_X;       // kernel kind only, n_train x p

  int num_treatments() const { return static_cast<int>(intercepts.size()); }
  int dim() const;
  void validate() const;

  // f^(1..K) at one point / at every row of X.
  Eigen::VectorXd decision_values(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd decision_matrix(const Eigen::MatrixXd& X) const;
};

struct FitConfig {
  double lambda = 1.0;   // penalty coefficient
  double epsilon = 0.0;  // DC stopping threshold; 0 selects the 1e-4*K default
  int max_iter = 50;
  int n_restarts = 1;
  double weight_cap = std::numeric_limits<double>::infinity();
  double propensity_floor = 1e-3;
  std::uint64_t rng_seed = 0;

  double effective_epsilon(int k) const { return epsilon > 0.0 ? epsilon : 1e-4 * k; }
  void validate() const;
};

}  // namespace mlrwl
