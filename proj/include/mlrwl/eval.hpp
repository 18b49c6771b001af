#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlrwl/dc.hpp"
#include "mlrwl/simgen.hpp"
#include "mlrwl/types.hpp"
#include "mlrwl/working_models.hpp"

namespace mlrwl {

// Matched-set mean: sum Y_i 1(A_i = d(X_i)) / sum 1(A_i = d(X_i)).
double empirical_value(const TrialDataset& test, const DecisionFunctionParams& rule);

// Fraction of rows where the sign rule reproduces the oracle assignment on
// all K coordinates.
double accuracy(const DecisionFunctionParams& rule, const Eigen::MatrixXd& X,
                const SimSetting& setting);

struct MethodConfig {
  RuleKind rule = RuleKind::linear;
  FitConfig fit;
  bool kernel_bandwidth_auto = true;
  double kernel_bandwidth = 0.0;
  bool estimate_propensity = false;  // false: use the dataset's recorded values
  double propensity_ridge = -1.0;    // <0 selects the 1e-3*n default
};

struct PipelineResult {
  DecisionFunctionParams params;
  FitDiagnostics diagnostics;
  ResidualWeights weights;
  TreatmentFreeModel treatment_free;
  double bandwidth_used = 0.0;  // kernel rules only
};

// Working models -> residual weights -> DC fit.
PipelineResult fit_pipeline(const TrialDataset& train, const MethodConfig& config);

struct TuneCell {
  std::string label;
  MethodConfig config;
};

struct TuneResult {
  int best_index = -1;
  std::vector<double> scores;  // validation empirical value; NaN for failed cells
  std::vector<std::string> warnings;
  PipelineResult best_fit;
};

// Fits every cell on train, scores on validation, returns the argmax; ties
// prefer smaller lambda, then linear rules.
TuneResult grid_tune(const TrialDataset& train, const TrialDataset& validation,
                     const std::vector<TuneCell>& grid);

struct ExperimentSummary {
  int setting_id = 0;
  int n = 0;
  std::string method;
  double mean_value = 0.0;
  double sd_value = 0.0;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  int replications = 0;
  std::vector<std::uint64_t> seeds;
  int excluded = 0;
  std::vector<std::string> failures;
};

// Per replicate: fresh train (size n) and test (size 10n capped at 1e4) sets,
// fit on train, score value and accuracy on test. Replicates run in parallel
// with per-replicate derived seeds; aggregation is by replicate index, so the
// summary does not depend on the thread count.
ExperimentSummary replicate_experiment(const SimSetting& setting, int n, int reps, Design design,
                                       const MethodConfig& config, std::uint64_t master_seed);

// The pinned benchmark configuration: randomized designs use the recorded
// uniform propensities, observational designs estimate them.
MethodConfig reproduce_method_config(RuleKind rule, Design design);

}  // namespace mlrwl
