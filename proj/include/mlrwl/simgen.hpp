#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mlrwl/rng.hpp"
#include "mlrwl/types.hpp"

namespace mlrwl {

// The three benchmark data generating processes: settings 1 and 2 use two
// treatments, setting 3 uses three; covariates are always 10-dimensional.
struct SimSetting {
  int id = 1;
  int num_treatments = 2;
  int p = 10;
};

SimSetting sim_setting(int id);

enum class Design { rct, observational };

struct NoiseSpec {
  bool enabled = true;
  bool param_is_variance = true;  // N(0, 0.3) read as variance 0.3
  double param = 0.3;

  double stddev() const { return param_is_variance ? std::sqrt(param) : param; }
};

// i.i.d. uniform(-1, 1) entries, row-major draw order.
Eigen::MatrixXd gen_covariates(int n, Rng& rng);

// The published treatment-effect formulas, evaluated exactly.
double treatment_effect(const SimSetting& setting, const TreatmentVector& a,
                        const Eigen::VectorXd& x);

// Y = 1 + X1 + 2 X2 + tau_a(x) + eps.
double gen_outcome(const SimSetting& setting, const Eigen::VectorXd& x, const TreatmentVector& a,
                   Rng& rng, const NoiseSpec& noise = {});

// Uniform assignment over the 2^K combinations.
std::vector<TreatmentVector> assign_rct(int n, int k, Rng& rng);

struct ObsAssignment {
  std::vector<TreatmentVector> a;
  Eigen::VectorXd propensity;  // true probability of the sampled code
};

// Softmax assignment with logits j * x' tau over categorical codes j,
// tau = (-0.5, ..., -0.1, 0.1, ..., 0.5); requires p = 10.
ObsAssignment assign_observational(const Eigen::MatrixXd& X, int k, Rng& rng);

// argmax of the treatment effects over all combinations; ties resolve to the
// lexicographically smallest vector.
TreatmentVector oracle_optimal(const SimSetting& setting, const Eigen::VectorXd& x);

// Full dataset draw: covariates, assignment per design, outcomes. RCT records
// the uniform 2^-K propensities; the observational design records the true
// softmax values.
TrialDataset gen_trial(const SimSetting& setting, int n, Design design, Rng& rng,
                       const NoiseSpec& noise = {});

}  // namespace mlrwl
