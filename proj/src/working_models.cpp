#include "mlrwl/working_models.hpp"

#include <cmath>
#include <string>

namespace mlrwl {

namespace {

// Intercepts stay essentially free; this keeps the optimum finite when a
// categorical code never occurs.
constexpr double kInterceptRidge = 1e-3;

Eigen::VectorXd augment(const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size() + 1);
  out[0] = 1.0;
  out.tail(x.size()) = x;
  return out;
}

Eigen::MatrixXd augment_rows(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out(X.rows(), X.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(X.cols()) = X;
  return out;
}

Eigen::VectorXd softmax_from_logits(Eigen::VectorXd logits) {
  const double shift = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - shift).exp();
  return e / e.sum();
}

// Gradient of the penalized multinomial log-likelihood over the free classes
// (all but the last, which stays pinned at zero).
Eigen::VectorXd multinomial_gradient(const Eigen::MatrixXd& tau, const Eigen::MatrixXd& Xa,
                                     const Eigen::VectorXi& cls,
                                     const Eigen::VectorXd& penalty_diag) {
  const int classes = static_cast<int>(tau.rows());
  const int free_classes = classes - 1;
  const int pd = static_cast<int>(tau.cols());
  const int n = static_cast<int>(Xa.rows());
  Eigen::VectorXd g = Eigen::VectorXd::Zero(free_classes * pd);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd probs = softmax_from_logits(tau * Xa.row(i).transpose());
    for (int j = 0; j < free_classes; ++j) {
      const double resid = (cls[i] == j ? 1.0 : 0.0) - probs[j];
      g.segment(j * pd, pd) += resid * Xa.row(i).transpose();
    }
  }
  for (int j = 0; j < free_classes; ++j)
    g.segment(j * pd, pd) -= 2.0 * penalty_diag.cwiseProduct(tau.row(j).transpose());
  return g;
}

Eigen::VectorXd make_penalty_diag(int p, double ridge_lambda) {
  Eigen::VectorXd penalty_diag(p + 1);
  penalty_diag[0] = kInterceptRidge;
  penalty_diag.tail(p).setConstant(ridge_lambda);
  return penalty_diag;
}

}  // namespace

Eigen::VectorXd PropensityModel::class_probabilities(const Eigen::VectorXd& x) const {
  if (x.size() + 1 != tau.cols())
    throw DimensionMismatchError("propensity: covariate dimension mismatch");
  return softmax_from_logits(tau * augment(x));
}

PropensityModel fit_propensity(const TrialDataset& dataset, double ridge_lambda, double floor) {
  const int n = dataset.n();
  const int p = dataset.p();
  const int k = dataset.num_treatments();
  if (n < 1 || k < 1) throw InvalidInputError("fit_propensity: empty dataset");
  if (!(floor > 0.0 && floor < 1.0)) throw InvalidInputError("fit_propensity: floor must be in (0,1)");
  if (ridge_lambda < 0.0) ridge_lambda = 1e-3 * static_cast<double>(n);

  const int classes = 1 << k;
  const int free_classes = classes - 1;
  const int pd = p + 1;
  const int dim = free_classes * pd;

  Eigen::MatrixXd Xa = augment_rows(dataset.X);
  Eigen::VectorXi cls(n);
  for (int i = 0; i < n; ++i) cls[i] = dataset.A[static_cast<std::size_t>(i)].code() - 1;

  const Eigen::VectorXd penalty_diag = make_penalty_diag(p, ridge_lambda);

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd probs(n, classes);

  auto unpack = [&](const Eigen::VectorXd& th) -> Eigen::MatrixXd {
    Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(classes, pd);
    for (int j = 0; j < free_classes; ++j) tau.row(j) = th.segment(j * pd, pd);
    return tau;
  };

  auto objective = [&](const Eigen::VectorXd& th) -> double {
    const Eigen::MatrixXd tau = unpack(th);
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd logits = tau * Xa.row(i).transpose();
      const double shift = logits.maxCoeff();
      const double lse = shift + std::log((logits.array() - shift).exp().sum());
      ll += logits[cls[i]] - lse;
    }
    double pen = 0.0;
    for (int j = 0; j < free_classes; ++j)
      pen += th.segment(j * pd, pd).cwiseProduct(penalty_diag.cwiseSqrt()).squaredNorm();
    return ll - pen;
  };

  auto fill_probs = [&](const Eigen::VectorXd& th) {
    const Eigen::MatrixXd tau = unpack(th);
    for (int i = 0; i < n; ++i)
      probs.row(i) = softmax_from_logits(tau * Xa.row(i).transpose()).transpose();
  };

  auto gradient = [&](const Eigen::VectorXd& th) -> Eigen::VectorXd {
    fill_probs(th);
    return multinomial_gradient(unpack(th), Xa, cls, penalty_diag);
  };

  const int max_newton = 100;
  double obj = objective(theta);
  int it = 0;
  double gnorm = 0.0;
  for (it = 0; it < max_newton; ++it) {
    const Eigen::VectorXd g = gradient(theta);
    gnorm = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
    if (gnorm <= 1e-6) break;
    // negative Hessian of the penalized log-likelihood
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd xi = Xa.row(i).transpose();
      for (int j = 0; j < free_classes; ++j) {
        const double pj = probs(i, j);
        if (pj == 0.0) continue;
        for (int l = j; l < free_classes; ++l) {
          const double w = (j == l ? pj * (1.0 - pj) : -pj * probs(i, l));
          if (w == 0.0) continue;
          H.block(j * pd, l * pd, pd, pd) += w * (xi * xi.transpose());
        }
      }
    }
    for (int j = 0; j < free_classes; ++j)
      H.block(j * pd, j * pd, pd, pd).diagonal() += 2.0 * penalty_diag;
    Eigen::MatrixXd Hfull = H.selfadjointView<Eigen::Upper>();
    Hfull.diagonal().array() += 1e-12;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Hfull);
    Eigen::VectorXd step = ldlt.solve(g);
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const double cand = objective(theta + t * step);
      if (cand > obj - 1e-14 * std::abs(obj)) {
        theta += t * step;
        obj = cand;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;
  }
  if (gnorm > 1e-6) {
    const Eigen::VectorXd g = gradient(theta);
    gnorm = g.cwiseAbs().maxCoeff();
    if (gnorm > 1e-6)
      throw OptimizationError("fit_propensity: no convergence after iteration cap, gradient norm " +
                              std::to_string(gnorm));
  }

  PropensityModel model;
  model.tau = unpack(theta);
  model.ridge_lambda = ridge_lambda;
  model.floor = floor;
  model.num_treatments = k;
  return model;
}

double propensity_gradient_norm(const PropensityModel& model, const TrialDataset& dataset) {
  const int n = dataset.n();
  Eigen::MatrixXd Xa = augment_rows(dataset.X);
  Eigen::VectorXi cls(n);
  for (int i = 0; i < n; ++i) cls[i] = dataset.A[static_cast<std::size_t>(i)].code() - 1;
  const Eigen::VectorXd g = multinomial_gradient(
      model.tau, Xa, cls, make_penalty_diag(dataset.p(), model.ridge_lambda));
  return g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
}

double predict_propensity(const PropensityModel& model, const Eigen::VectorXd& x,
                          const TreatmentVector& a) {
  if (a.size() != model.num_treatments)
    throw DimensionMismatchError("predict_propensity: treatment length mismatch");
  const Eigen::VectorXd probs = model.class_probabilities(x);
  return std::max(probs[a.code() - 1], model.floor);
}

double TreatmentFreeModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() + 1 != eta.size())
    throw DimensionMismatchError("treatment-free model: covariate dimension mismatch");
  return eta[0] + eta.tail(x.size()).dot(x);
}

Eigen::VectorXd TreatmentFreeModel::predict_all(const Eigen::MatrixXd& X) const {
  if (X.cols() + 1 != eta.size())
    throw DimensionMismatchError("treatment-free model: covariate dimension mismatch");
  return (X * eta.tail(X.cols())).array() + eta[0];
}

TreatmentFreeModel fit_treatment_free(const TrialDataset& dataset,
                                      const Eigen::VectorXd& propensity) {
  const int n = dataset.n();
  if (propensity.size() != n)
    throw DimensionMismatchError("fit_treatment_free: propensity length mismatch");
  for (int i = 0; i < n; ++i)
    if (!(propensity[i] > 0.0))
      throw PositivityError("fit_treatment_free: nonpositive propensity at row " + std::to_string(i));
  const Eigen::MatrixXd Xa = augment_rows(dataset.X);
  const Eigen::VectorXd sw = propensity.cwiseInverse().cwiseSqrt();
  const Eigen::MatrixXd Xw = sw.asDiagonal() * Xa;
  const Eigen::VectorXd yw = sw.cwiseProduct(dataset.Y);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < Xa.cols())
    throw DegenerateDataError(
        "fit_treatment_free: rank-deficient design (rank " + std::to_string(qr.rank()) + " of " +
        std::to_string(Xa.cols()) + "); consider a ridge fallback");
  TreatmentFreeModel model;
  model.eta = qr.solve(yw);
  return model;
}

Eigen::VectorXd propensity_vector(const TrialDataset& dataset, const PropensitySource& source) {
  const int n = dataset.n();
  Eigen::VectorXd out(n);
  if (source.kind == PropensitySource::Kind::known) {
    if (!dataset.propensity)
      throw InvalidInputError("propensity source 'known' requires recorded propensities");
    out = *dataset.propensity;
  } else {
    if (source.model == nullptr) throw InvalidInputError("propensity source model missing");
    for (int i = 0; i < n; ++i)
      out[i] = predict_propensity(*source.model, dataset.X.row(i),
                                  dataset.A[static_cast<std::size_t>(i)]);
  }
  return out;
}

ResidualWeights residual_weights(const TrialDataset& dataset, const TreatmentFreeModel& g_model,
                                 const PropensitySource& source, double cap) {
  const Eigen::VectorXd prop = propensity_vector(dataset, source);
  const int n = dataset.n();
  ResidualWeights out;
  out.w.resize(n);
  const Eigen::VectorXd g = g_model.predict_all(dataset.X);
  for (int i = 0; i < n; ++i) {
    if (!(prop[i] > 0.0))
      throw PositivityError("residual_weights: nonpositive propensity at row " + std::to_string(i));
    double w = (dataset.Y[i] - g[i]) / prop[i];
    if (std::isfinite(cap)) w = std::clamp(w, -cap, cap);
    if (!std::isfinite(w))
      throw NumericError("residual_weights: non-finite weight at row " + std::to_string(i));
    out.w[i] = w;
  }
  return out;
}

}  // namespace mlrwl
