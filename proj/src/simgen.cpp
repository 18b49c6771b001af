#include "mlrwl/simgen.hpp"

#include <cmath>
#include <string>

namespace mlrwl {

namespace {

double ind(bool cond) { return cond ? 1.0 : 0.0; }

double effect_setting1(const TreatmentVector& a, const Eigen::VectorXd& x) {
  const double u = x[0] + x[1];
  const double v = -x[0] + x[1];
  if (a[0] == -1 && a[1] == -1) return 0.0;
  if (a[0] == -1 && a[1] == 1) return 6.0 * ind(u > 0) * ind(v < 0);
  if (a[0] == 1 && a[1] == -1) return 5.0 * ind(u < 0) * ind(v < 0);
  return 3.0 * ind(u > 0) * ind(v > 0);
}

double effect_setting2(const TreatmentVector& a, const Eigen::VectorXd& x) {
  if (a[0] == -1 && a[1] == -1) return (x[0] + x[1]) * (x[0] + x[1]);
  if (a[0] == -1 && a[1] == 1) return x[1] * x[1] + x[2] * x[3];
  if (a[0] == 1 && a[1] == -1) return -x[2] * x[3];
  return x[1] * x[1] + 3.0 * x[4] * x[5];
}

double effect_setting3(const TreatmentVector& a, const Eigen::VectorXd& x) {
  const double t1 = 2.0 * (x[0] + std::exp(x[1]));
  const double t2 = x[2] + (x[3] + x[4]) * (x[3] + x[4]);
  const double t3 = std::exp(x[5] + x[6]);
  const int code = ((a[0] == 1) << 2) | ((a[1] == 1) << 1) | (a[2] == 1);
  switch (code) {
    case 0: return 0.0;                                                     // (-1,-1,-1)
    case 1: return t1;                                                      // (-1,-1, 1)
    case 2: return t2;                                                      // (-1, 1,-1)
    case 3: return t1 + t2 + std::log((x[4] + 1.0) * (x[4] + 1.0));         // (-1, 1, 1)
    case 4: return t3;                                                      // ( 1,-1,-1)
    case 5: return t3 + t1 + x[7] + x[8] + x[9];                            // ( 1,-1, 1)
    case 6: return t3 + t2;                                                 // ( 1, 1,-1)
    default: {
      const double s = x[0] - x[4] + x[5];
      return t3 + t2 + t1 + s * s;                                          // ( 1, 1, 1)
    }
  }
}

}  // namespace

SimSetting sim_setting(int id) {
  switch (id) {
    case 1: return {1, 2, 10};
    case 2: return {2, 2, 10};
    case 3: return {3, 3, 10};
    default: throw InvalidInputError("simulation setting must be 1, 2 or 3");
  }
}

Eigen::MatrixXd gen_covariates(int n, Rng& rng) {
  if (n < 1) throw InvalidInputError("gen_covariates: n must be >= 1");
  Eigen::MatrixXd X(n, 10);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 10; ++j) X(i, j) = rng.uniform(-1.0, 1.0);
  return X;
}

double treatment_effect(const SimSetting& setting, const TreatmentVector& a,
                        const Eigen::VectorXd& x) {
  if (a.size() != setting.num_treatments)
    throw InvalidInputError("treatment_effect: treatment length " + std::to_string(a.size()) +
                            " does not match setting " + std::to_string(setting.id));
  for (int j = 0; j < a.size(); ++j)
    if (a[j] != -1 && a[j] != 1)
      throw InvalidInputError("treatment_effect: entries must be -1 or +1");
  if (x.size() != setting.p) throw DimensionMismatchError("treatment_effect: x must have length 10");
  switch (setting.id) {
    case 1: return effect_setting1(a, x);
    case 2: return effect_setting2(a, x);
    case 3: return effect_setting3(a, x);
    default: throw InvalidInputError("treatment_effect: unknown setting");
  }
}

double gen_outcome(const SimSetting& setting, const Eigen::VectorXd& x, const TreatmentVector& a,
                   Rng& rng, const NoiseSpec& noise) {
  const double g = 1.0 + x[0] + 2.0 * x[1];
  const double tau = treatment_effect(setting, a, x);
  const double eps = noise.enabled ? noise.stddev() * rng.normal() : 0.0;
  return g + tau + eps;
}

std::vector<TreatmentVector> assign_rct(int n, int k, Rng& rng) {
  if (n < 1) throw InvalidInputError("assign_rct: n must be >= 1");
  const int codes = 1 << k;
  std::vector<TreatmentVector> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int code = static_cast<int>(rng.uniform_int(1, static_cast<std::uint64_t>(codes)));
    out.push_back(TreatmentVector::from_code(code, k));
  }
  return out;
}

ObsAssignment assign_observational(const Eigen::MatrixXd& X, int k, Rng& rng) {
  if (X.cols() != 10)
    throw DimensionMismatchError("assign_observational: the design requires p = 10");
  Eigen::VectorXd tau(10);
  tau << -0.5, -0.4, -0.3, -0.2, -0.1, 0.1, 0.2, 0.3, 0.4, 0.5;
  const int n = static_cast<int>(X.rows());
  const int codes = 1 << k;
  ObsAssignment out;
  out.a.reserve(static_cast<std::size_t>(n));
  out.propensity.resize(n);
  for (int i = 0; i < n; ++i) {
    const double base = X.row(i).dot(tau);
    Eigen::VectorXd logits(codes);
    for (int j = 0; j < codes; ++j) logits[j] = static_cast<double>(j + 1) * base;
    const double shift = logits.maxCoeff();
    Eigen::VectorXd probs = (logits.array() - shift).exp();
    probs /= probs.sum();
    const double u = rng.uniform01();
    double cum = 0.0;
    int chosen = codes - 1;
    for (int j = 0; j < codes; ++j) {
      cum += probs[j];
      if (u <= cum) {
        chosen = j;
        break;
      }
    }
    out.a.push_back(TreatmentVector::from_code(chosen + 1, k));
    out.propensity[i] = probs[chosen];
  }
  return out;
}

TreatmentVector oracle_optimal(const SimSetting& setting, const Eigen::VectorXd& x) {
  const auto combos = enumerate_combinations(setting.num_treatments);
  int best = 0;
  double best_val = treatment_effect(setting, combos[0], x);
  for (int j = 1; j < static_cast<int>(combos.size()); ++j) {
    const double v = treatment_effect(setting, combos[static_cast<std::size_t>(j)], x);
    if (v > best_val) {  // strict: ties keep the lexicographically smallest
      best_val = v;
      best = j;
    }
  }
  return combos[static_cast<std::size_t>(best)];
}

TrialDataset gen_trial(const SimSetting& setting, int n, Design design, Rng& rng,
                       const NoiseSpec& noise) {
  TrialDataset data;
  data.X = gen_covariates(n, rng);
  if (design == Design::rct) {
    data.A = assign_rct(n, setting.num_treatments, rng);
    data.propensity =
        Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(1 << setting.num_treatments));
  } else {
    ObsAssignment oa = assign_observational(data.X, setting.num_treatments, rng);
    data.A = std::move(oa.a);
    data.propensity = std::move(oa.propensity);
  }
  data.Y.resize(n);
  for (int i = 0; i < n; ++i)
    data.Y[i] = gen_outcome(setting, data.X.row(i), data.A[static_cast<std::size_t>(i)], rng, noise);
  return data;
}

}  // namespace mlrwl
