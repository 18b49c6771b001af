// Command-line front end: simulate benchmark datasets, fit combination
// treatment rules, predict assignments, and reproduce the benchmark tables.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "mlrwl/csv.hpp"
#include "mlrwl/eval.hpp"
#include "mlrwl/model_io.hpp"

namespace {

using namespace mlrwl;

struct SimulateArgs {
  int setting = 1;
  int n = 100;
  std::string design = "rct";
  std::uint64_t seed = 0;
  std::string out;
  bool no_noise = false;
  bool noise_param_is_variance = true;
};

void run_simulate(const SimulateArgs& args) {
  const SimSetting setting = sim_setting(args.setting);
  NoiseSpec noise;
  noise.enabled = !args.no_noise;
  noise.param_is_variance = args.noise_param_is_variance;
  Rng rng(args.seed);
  const Design design = args.design == "obs" ? Design::observational : Design::rct;
  const TrialDataset data = gen_trial(setting, args.n, design, rng, noise);
  write_dataset_csv(args.out, data, design == Design::observational);
  std::cout << "wrote " << args.n << " rows (setting " << setting.id << ", K="
            << setting.num_treatments << ", design " << args.design << ") to " << args.out << "\n";
}

struct FitArgs {
  std::string data;
  std::string rule = "linear";
  double lambda = 1.0;
  std::string bandwidth = "auto";
  std::string propensity = "estimate";
  int restarts = 1;
  std::uint64_t seed = 0;
  std::string out;
  double epsilon = 0.0;
  int max_iter = 50;
  double weight_cap = 0.0;  // 0 means no cap
  double floor = 1e-3;
};

MethodConfig fit_args_to_config(const FitArgs& args) {
  MethodConfig config;
  config.rule = args.rule == "kernel" ? RuleKind::kernel : RuleKind::linear;
  config.fit.lambda = args.lambda;
  config.fit.epsilon = args.epsilon;
  config.fit.max_iter = args.max_iter;
  config.fit.n_restarts = args.restarts;
  config.fit.rng_seed = args.seed;
  config.fit.propensity_floor = args.floor;
  if (args.weight_cap > 0.0) config.fit.weight_cap = args.weight_cap;
  config.estimate_propensity = args.propensity == "estimate";
  if (args.bandwidth == "auto") {
    config.kernel_bandwidth_auto = true;
  } else {
    config.kernel_bandwidth_auto = false;
    config.kernel_bandwidth = std::stod(args.bandwidth);
    if (!(config.kernel_bandwidth > 0.0))
      throw InvalidInputError("--kernel-bandwidth must be positive or 'auto'");
  }
  return config;
}

void run_fit(const FitArgs& args) {
  const TrialDataset data = read_dataset_csv(args.data);
  const MethodConfig config = fit_args_to_config(args);
  const PipelineResult fit = fit_pipeline(data, config);

  ModelFile model;
  model.params = fit.params;
  model.fit_config = config.fit;
  model.train_csv_sha1 = git_blob_sha1_of_file(args.data);
  save_model(args.out, model);

  const FitDiagnostics& diag = fit.diagnostics;
  std::cout << "fit: rule " << args.rule << ", n " << data.n() << ", K " << data.num_treatments()
            << ", lambda " << format_double(config.fit.lambda) << ", gamma "
            << format_double(diag.gamma) << "\n";
  if (config.rule == RuleKind::kernel)
    std::cout << "kernel_bandwidth_used " << format_double(fit.bandwidth_used)
              << (config.kernel_bandwidth_auto ? " (median heuristic)" : "") << "\n";
  std::cout << "iterations " << diag.iterations << (diag.converged ? " (converged)" : " (cap)")
            << ", restart " << diag.restart_index << " of " << config.fit.n_restarts << "\n";
  std::cout << "descent_check " << (diag.descent_ok ? "ok" : "VIOLATED")
            << ", max_ascent " << format_double(diag.max_ascent) << "\n";
  std::cout << "objective_trace";
  for (double v : diag.objective_trace) std::cout << " " << format_double(v);
  std::cout << "\n";
  std::cout << "model written to " << args.out << "\n";
}

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
};

void run_predict(const PredictArgs& args) {
  const ModelFile model = load_model(args.model);
  const TrialDataset data = read_dataset_csv(args.data);
  if (data.p() != model.params.dim())
    throw DimensionMismatchError("predict: data has p=" + std::to_string(data.p()) +
                                 " but the model expects p=" + std::to_string(model.params.dim()));
  const Eigen::MatrixXd F = model.params.decision_matrix(data.X);
  write_predictions_csv(args.out, F);
  std::cout << "wrote " << F.rows() << " recommendations to " << args.out << "\n";
}

struct ReproduceArgs {
  int table = 1;
  int setting = 1;
  int n = 400;
  int reps = 20;
  std::uint64_t seed = 0;
  std::string out;
  std::string method = "both";
};

double paper_reference(int table, int setting, int n, RuleKind rule) {
  const int ni = n == 400 ? 0 : n == 800 ? 1 : 2;
  // n = 400 / 800 / 2000 columns of the benchmark tables
  static const double kValueRct[3][2][3] = {
      {{4.104, 4.179, 4.238}, {4.022, 4.156, 4.226}},
      {{1.369, 1.372, 1.375}, {1.700, 1.810, 1.923}},
      {{5.664, 6.000, 6.267}, {6.328, 6.415, 6.416}}};
  static const double kAccRct[3][2][3] = {
      {{0.797, 0.853, 0.884}, {0.664, 0.744, 0.797}},
      {{0.262, 0.267, 0.272}, {0.452, 0.539, 0.638}},
      {{0.584, 0.647, 0.708}, {0.717, 0.745, 0.746}}};
  static const double kValueObs[3][2][3] = {
      {{4.112, 4.398, 4.437}, {3.934, 4.218, 4.357}},
      {{1.382, 1.420, 1.427}, {1.836, 1.948, 2.080}},
      {{4.413, 4.618, 4.660}, {4.730, 4.734, 4.736}}};
  static const double kAccObs[3][2][3] = {
      {{0.773, 0.861, 0.893}, {0.691, 0.764, 0.803}},
      {{0.255, 0.266, 0.267}, {0.473, 0.522, 0.596}},
      {{0.379, 0.565, 0.600}, {0.721, 0.723, 0.742}}};
  const int si = setting - 1;
  const int ri = rule == RuleKind::linear ? 0 : 1;
  switch (table) {
    case 1: return kValueRct[si][ri][ni];
    case 2: return kAccRct[si][ri][ni];
    case 4: return kValueObs[si][ri][ni];
    default: return kAccObs[si][ri][ni];
  }
}

void run_reproduce(const ReproduceArgs& args) {
  if (args.table != 1 && args.table != 2 && args.table != 4 && args.table != 5)
    throw InvalidInputError("--table must be one of 1, 2, 4, 5");
  if (args.setting < 1 || args.setting > 3)
    throw InvalidInputError("--setting must be 1, 2 or 3");
  if (args.n != 400 && args.n != 800 && args.n != 2000)
    throw InvalidInputError("--n must come from the benchmark grid {400, 800, 2000}");
  if (args.reps < 1) throw InvalidInputError("--reps must be >= 1");

  const SimSetting setting = sim_setting(args.setting);
  const Design design = (args.table == 1 || args.table == 2) ? Design::rct : Design::observational;
  const bool value_table = args.table == 1 || args.table == 4;

  std::vector<RuleKind> rules;
  if (args.method == "linear" || args.method == "both") rules.push_back(RuleKind::linear);
  if (args.method == "kernel" || args.method == "both") rules.push_back(RuleKind::kernel);
  if (rules.empty()) throw InvalidInputError("--method must be linear, kernel or both");

  std::ofstream out(args.out, std::ios::binary);
  if (!out) throw IoError("cannot open '" + args.out + "' for writing");
  out << "setting,n,method,mean_value,sd_value,mean_accuracy,sd_accuracy,replications,excluded,"
         "reference,abs_deviation\n";
  for (RuleKind rule : rules) {
    const MethodConfig config = reproduce_method_config(rule, design);
    const ExperimentSummary s =
        replicate_experiment(setting, args.n, args.reps, design, config, args.seed);
    const double reference = paper_reference(args.table, args.setting, args.n, rule);
    const double metric = value_table ? s.mean_value : s.mean_accuracy;
    out << s.setting_id << "," << s.n << "," << s.method << "," << format_double(s.mean_value)
        << "," << format_double(s.sd_value) << "," << format_double(s.mean_accuracy) << ","
        << format_double(s.sd_accuracy) << "," << s.replications << "," << s.excluded << ","
        << format_double(reference) << "," << format_double(std::abs(metric - reference)) << "\n";
    std::cout << s.method << ": mean_value " << format_double(s.mean_value) << " (sd "
              << format_double(s.sd_value) << "), mean_accuracy " << format_double(s.mean_accuracy)
              << " (sd " << format_double(s.sd_accuracy) << "), reference "
              << format_double(reference) << "\n";
    for (const std::string& f : s.failures) std::cout << "  excluded replicate: " << f << "\n";
  }
  if (!out) throw IoError("write failure on '" + args.out + "'");
  std::cout << "report written to " << args.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Combination-treatment rule estimation by residual-weighted multi-label learning"};
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* csim = app.add_subcommand("simulate", "Generate a benchmark dataset CSV");
  csim->add_option("--setting", sim.setting, "Simulation setting")->required()->check(CLI::Range(1, 3));
  csim->add_option("--n", sim.n, "Sample size")->required()->check(CLI::PositiveNumber);
  csim->add_option("--design", sim.design, "Assignment design")
      ->check(CLI::IsMember({"rct", "obs"}))
      ->capture_default_str();
  csim->add_option("--seed", sim.seed, "RNG seed")->capture_default_str();
  csim->add_option("--out", sim.out, "Output CSV path")->required();
  csim->add_flag("--no-noise", sim.no_noise, "Disable outcome noise");
  csim->add_option("--noise-param-is-variance", sim.noise_param_is_variance,
                   "Interpret the 0.3 noise parameter as a variance (else stddev)")
      ->capture_default_str();

  FitArgs fit;
  CLI::App* cfit = app.add_subcommand("fit", "Fit decision rules on a dataset CSV");
  cfit->add_option("--data", fit.data, "Training CSV")->required();
  cfit->add_option("--rule", fit.rule, "Decision rule family")
      ->required()
      ->check(CLI::IsMember({"linear", "kernel"}));
  cfit->add_option("--lambda", fit.lambda, "Penalty coefficient")->capture_default_str();
  cfit->add_option("--kernel-bandwidth", fit.bandwidth, "RBF bandwidth or 'auto'")
      ->capture_default_str();
  cfit->add_option("--propensity", fit.propensity, "Propensity source")
      ->check(CLI::IsMember({"known", "estimate"}))
      ->capture_default_str();
  cfit->add_option("--restarts", fit.restarts, "Number of DC restarts")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cfit->add_option("--seed", fit.seed, "RNG seed")->capture_default_str();
  cfit->add_option("--out", fit.out, "Output model path")->required();
  cfit->add_option("--epsilon", fit.epsilon, "DC stopping threshold (0 = 1e-4*K)")
      ->capture_default_str();
  cfit->add_option("--max-iter", fit.max_iter, "DC iteration cap")->capture_default_str();
  cfit->add_option("--weight-cap", fit.weight_cap, "Residual weight cap (0 = none)")
      ->capture_default_str();
  cfit->add_option("--propensity-floor", fit.floor, "Estimated propensity floor")
      ->capture_default_str();

  PredictArgs pred;
  CLI::App* cpred = app.add_subcommand("predict", "Apply a fitted model to a dataset CSV");
  cpred->add_option("--model", pred.model, "Model file")->required();
  cpred->add_option("--data", pred.data, "Input CSV")->required();
  cpred->add_option("--out", pred.out, "Output CSV of recommendations")->required();

  ReproduceArgs rep;
  CLI::App* crep = app.add_subcommand("reproduce", "Replicate a benchmark table cell");
  crep->add_option("--table", rep.table, "Benchmark table (1, 2, 4, 5)")->required();
  crep->add_option("--setting", rep.setting, "Simulation setting")->required();
  crep->add_option("--n", rep.n, "Training sample size")->required();
  crep->add_option("--reps", rep.reps, "Replications")->capture_default_str();
  crep->add_option("--seed", rep.seed, "Master seed")->capture_default_str();
  crep->add_option("--out", rep.out, "Report CSV path")->required();
  crep->add_option("--method", rep.method, "Which rule families to run")
      ->check(CLI::IsMember({"linear", "kernel", "both"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
      app.exit(e);
      return 0;
    }
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (csim->parsed()) run_simulate(sim);
    if (cfit->parsed()) run_fit(fit);
    if (cpred->parsed()) run_predict(pred);
    if (crep->parsed()) run_reproduce(rep);
    return 0;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
