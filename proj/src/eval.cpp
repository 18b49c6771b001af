#include "mlrwl/eval.hpp"

#include <cmath>
#include <limits>

#include "mlrwl/loss.hpp"
#include "mlrwl/parallel.hpp"

namespace mlrwl {

double empirical_value(const TrialDataset& test, const DecisionFunctionParams& rule) {
  const int n = test.n();
  if (n < 1) throw InvalidInputError("empirical_value: empty test set");
  const Eigen::MatrixXd F = rule.decision_matrix(test.X);
  detail::CompensatedSum num;
  int matched = 0;
  for (int i = 0; i < n; ++i) {
    const TreatmentVector d = sign_decision(F.row(i));
    if (d == test.A[static_cast<std::size_t>(i)]) {
      num.add(test.Y[i]);
      ++matched;
    }
  }
  if (matched == 0)
    throw UndefinedValueError("empirical_value: no test record matches its recommendation");
  return num.value() / static_cast<double>(matched);
}

double accuracy(const DecisionFunctionParams& rule, const Eigen::MatrixXd& X,
                const SimSetting& setting) {
  const int m = static_cast<int>(X.rows());
  if (m < 1) throw InvalidInputError("accuracy: empty covariate matrix");
  const Eigen::MatrixXd F = rule.decision_matrix(X);
  int hits = 0;
  for (int i = 0; i < m; ++i) {
    const TreatmentVector d = sign_decision(F.row(i));
    if (d == oracle_optimal(setting, X.row(i))) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(m);
}

PipelineResult fit_pipeline(const TrialDataset& train, const MethodConfig& config) {
  PipelineResult out;
  PropensityModel prop_model;
  PropensitySource source = PropensitySource::known();
  if (config.estimate_propensity) {
    prop_model = fit_propensity(train, config.propensity_ridge, config.fit.propensity_floor);
    source = PropensitySource::from_model(prop_model);
  }
  const Eigen::VectorXd prop = propensity_vector(train, source);
  out.treatment_free = fit_treatment_free(train, prop);
  out.weights = residual_weights(train, out.treatment_free, source, config.fit.weight_cap);

  std::optional<KernelSpec> spec;
  if (config.rule == RuleKind::kernel) {
    KernelSpec ks;
    ks.kind = KernelSpec::Kind::rbf;
    ks.bandwidth = config.kernel_bandwidth_auto ? median_bandwidth(train.X) : config.kernel_bandwidth;
    spec = ks;
    out.bandwidth_used = ks.bandwidth;
  }
  FitResult fit = dc_fit(train, out.weights, config.fit, config.rule, spec);
  out.params = std::move(fit.params);
  out.diagnostics = std::move(fit.diagnostics);
  return out;
}

TuneResult grid_tune(const TrialDataset& train, const TrialDataset& validation,
                     const std::vector<TuneCell>& grid) {
  if (grid.empty()) throw InvalidInputError("grid_tune: empty grid");
  TuneResult result;
  result.scores.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<PipelineResult> fits(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    try {
      fits[g] = fit_pipeline(train, grid[g].config);
      result.scores[g] = empirical_value(validation, fits[g].params);
    } catch (const Error& e) {
      result.warnings.push_back("cell '" + grid[g].label + "' failed: " + e.what());
    }
  }
  int best = -1;
  for (int g = 0; g < static_cast<int>(grid.size()); ++g) {
    const double s = result.scores[static_cast<std::size_t>(g)];
    if (std::isnan(s)) continue;
    if (best < 0) {
      best = g;
      continue;
    }
    const double bs = result.scores[static_cast<std::size_t>(best)];
    if (s > bs) {
      best = g;
    } else if (s == bs) {
      const auto& gc = grid[static_cast<std::size_t>(g)].config;
      const auto& bc = grid[static_cast<std::size_t>(best)].config;
      if (gc.fit.lambda < bc.fit.lambda ||
          (gc.fit.lambda == bc.fit.lambda && gc.rule == RuleKind::linear &&
           bc.rule == RuleKind::kernel))
        best = g;
    }
  }
  if (best < 0) {
    std::string msg = "grid_tune: all cells failed";
    for (const auto& w : result.warnings) msg += "\n  " + w;
    throw TuningError(msg);
  }
  result.best_index = best;
  result.best_fit = std::move(fits[static_cast<std::size_t>(best)]);
  return result;
}

MethodConfig reproduce_method_config(RuleKind rule, Design design) {
  MethodConfig config;
  config.rule = rule;
  config.fit.lambda = rule == RuleKind::linear ? 1.0 : 1.0;
  config.fit.max_iter = 50;
  config.fit.n_restarts = 1;
  config.kernel_bandwidth_auto = true;
  config.estimate_propensity = design == Design::observational;
  return config;
}

ExperimentSummary replicate_experiment(const SimSetting& setting, int n, int reps, Design design,
                                       const MethodConfig& config, std::uint64_t master_seed) {
  if (reps < 1) throw InvalidInputError("replicate_experiment: reps must be >= 1");
  if (n < 1) throw InvalidInputError("replicate_experiment: n must be >= 1");

  struct RepResult {
    double value = 0.0, acc = 0.0;
    bool ok = false;
    std::string error;
  };
  std::vector<RepResult> results(static_cast<std::size_t>(reps));
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) seeds[static_cast<std::size_t>(r)] = Rng::derive(master_seed, r);

  const int test_n = std::min(10 * n, 10000);

  parallel_for(reps, [&](int r) {
    RepResult& res = results[static_cast<std::size_t>(r)];
    try {
      Rng rng(seeds[static_cast<std::size_t>(r)]);
      const TrialDataset train = gen_trial(setting, n, design, rng);
      const TrialDataset test = gen_trial(setting, test_n, design, rng);
      MethodConfig cfg = config;
      cfg.fit.rng_seed = seeds[static_cast<std::size_t>(r)];
      const PipelineResult fit = fit_pipeline(train, cfg);
      res.value = empirical_value(test, fit.params);
      res.acc = accuracy(fit.params, test.X, setting);
      res.ok = true;
    } catch (const Error& e) {
      res.error = e.what();
    }
  });

  ExperimentSummary summary;
  summary.setting_id = setting.id;
  summary.n = n;
  summary.method = config.rule == RuleKind::linear ? "MLRWL-Linear" : "MLRWL-Kernel";
  summary.seeds = seeds;
  detail::CompensatedSum sv, sv2, sa, sa2;
  int ok_count = 0;
  for (const RepResult& res : results) {
    if (!res.ok) {
      ++summary.excluded;
      summary.failures.push_back(res.error);
      continue;
    }
    ++ok_count;
    sv.add(res.value);
    sv2.add(res.value * res.value);
    sa.add(res.acc);
    sa2.add(res.acc * res.acc);
  }
  summary.replications = ok_count;
  if (ok_count == 0) throw FitError("replicate_experiment: every replicate failed");
  const double mv = sv.value() / ok_count;
  const double ma = sa.value() / ok_count;
  summary.mean_value = mv;
  summary.mean_accuracy = ma;
  if (ok_count > 1) {
    summary.sd_value = std::sqrt(std::max(0.0, (sv2.value() - ok_count * mv * mv) / (ok_count - 1)));
    summary.sd_accuracy =
        std::sqrt(std::max(0.0, (sa2.value() - ok_count * ma * ma) / (ok_count - 1)));
  }
  return summary;
}

}  // namespace mlrwl
