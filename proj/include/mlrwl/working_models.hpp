#pragma once

#include <Eigen/Dense>

#include "mlrwl/types.hpp"

namespace mlrwl {

// Ridge-penalized multinomial logistic regression over the 2^K categorical
// codes. The last class is pinned to zero for identifiability; slopes carry
// the ridge penalty, intercepts only a vanishing one so that class
// frequencies are recovered when covariates are uninformative.
struct PropensityModel {
  Eigen::MatrixXd tau;  // 2^K x (p+1); column 0 is the intercept; last row zero
  double ridge_lambda = 0.0;
  double floor = 1e-3;
  int num_treatments = 1;

  int num_classes() const { return static_cast<int>(tau.rows()); }
  // Softmax over all codes, before flooring; sums to one.
  Eigen::VectorXd class_probabilities(const Eigen::VectorXd& x) const;
};

// ridge_lambda < 0 selects the 1e-3 * n default.
PropensityModel fit_propensity(const TrialDataset& dataset, double ridge_lambda = -1.0,
                               double floor = 1e-3);

double predict_propensity(const PropensityModel& model, const Eigen::VectorXd& x,
                          const TreatmentVector& a);

// Infinity norm of the penalized log-likelihood gradient at the fitted
// coefficients; the fit certificate is <= 1e-6.
double propensity_gradient_norm(const PropensityModel& model, const TrialDataset& dataset);

// Linear model for the treatment-free effects, fit by inverse-propensity
// weighted least squares (plain least squares under uniform propensities).
struct TreatmentFreeModel {
  Eigen::VectorXd eta;  // p+1, intercept first

  double predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_all(const Eigen::MatrixXd& X) const;
};

TreatmentFreeModel fit_treatment_free(const TrialDataset& dataset,
                                      const Eigen::VectorXd& propensity);

struct PropensitySource {
  enum class Kind { known, model };
  Kind kind = Kind::known;
  const PropensityModel* model = nullptr;

  static PropensitySource known() { return {Kind::known, nullptr}; }
  static PropensitySource from_model(const PropensityModel& m) { return {Kind::model, &m}; }
};

// Per-row P(a_i | x_i): the dataset's recorded values, or floored model
// predictions.
Eigen::VectorXd propensity_vector(const TrialDataset& dataset, const PropensitySource& source);

// w_i = (y_i - g(x_i)) / P(a_i | x_i), clipped to [-cap, cap].
ResidualWeights residual_weights(const TrialDataset& dataset, const TreatmentFreeModel& g_model,
                                 const PropensitySource& source,
                                 double cap = std::numeric_limits<double>::infinity());

}  // namespace mlrwl
