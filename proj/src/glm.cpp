#include "critr/glm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "critr/error.hpp"

namespace critr {

namespace {

double bernoulli_deviance(const Vector& y, const Vector& eta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log(1 + exp(-|eta|)) form avoids overflow for large |eta|.
    const double e = eta[i];
    const double log1pexp = std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e)));
    dev += 2.0 * (log1pexp - y[i] * e);
  }
  return dev;
}

}  // namespace

double reciprocal_condition(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  if (!A.allFinite()) return 0.0;
  const Vector s = Eigen::JacobiSVD<Matrix>(A).singularValues();
  return s[0] > 0.0 ? s[s.size() - 1] / s[0] : 0.0;
}

LogisticFit fit_logistic(const Matrix& X, const Vector& y, const IrlsOptions& options) {
  if (X.rows() != y.size()) throw std::invalid_argument("fit_logistic: X and y lengths differ");
  if (X.rows() == 0 || X.cols() == 0) throw DegenerateSampleError("fit_logistic: empty design");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw std::invalid_argument("fit_logistic: response must be 0/1");
  }

  {
    const double rc = reciprocal_condition(X.transpose() * X);
    if (!(rc > 1e-13)) throw SingularSystemError("fit_logistic: design is rank deficient", rc);
  }

  const Eigen::Index p = X.cols();
  LogisticFit fit;
  fit.coefficients = Vector::Zero(p);
  Vector eta = Vector::Zero(X.rows());
  double deviance = bernoulli_deviance(y, eta);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    fit.iterations = iter;
    const Vector mu = eta.unaryExpr([](double v) { return expit(v); });
    const Vector score = X.transpose() * (y - mu);
    if (score.cwiseAbs().maxCoeff() < options.score_tolerance) {
      fit.converged = true;
      break;
    }
    const Vector w = mu.cwiseProduct(Vector::Ones(mu.size()) - mu).cwiseMax(1e-12);
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Vector step = ldlt.solve(score);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) break;

    // Step halving guards against overshooting far from the optimum.
    Vector candidate = fit.coefficients + step;
    Vector cand_eta = X * candidate;
    double cand_dev = bernoulli_deviance(y, cand_eta);
    for (int half = 0; half < 30 && !(cand_dev <= deviance + 1e-12 * (1.0 + deviance)); ++half) {
      step *= 0.5;
      candidate = fit.coefficients + step;
      cand_eta = X * candidate;
      cand_dev = bernoulli_deviance(y, cand_eta);
    }
    fit.coefficients = candidate;
    eta = cand_eta;
    deviance = cand_dev;
    const double scale = std::max(1.0, fit.coefficients.cwiseAbs().maxCoeff());
    if (step.cwiseAbs().maxCoeff() < options.step_tolerance * scale) {
      fit.converged = true;
      break;
    }
  }
  fit.deviance = deviance;
  if (!fit.coefficients.allFinite()) fit.converged = false;
  if (eta.size() > 0 && eta.cwiseAbs().maxCoeff() > 30.0) {
    fit.warning = "fitted probabilities numerically 0 or 1 (possible separation)";
  }
  return fit;
}

Vector predict_prob(const LogisticFit& fit, const Matrix& X) {
  if (X.cols() != fit.coefficients.size()) {
    throw std::invalid_argument("predict_prob: design has " + std::to_string(X.cols()) +
                                " columns, fit has " + std::to_string(fit.coefficients.size()));
  }
  const Vector eta = X * fit.coefficients;
  return eta.unaryExpr([](double v) {
    return std::clamp(expit(v), kProbabilityClamp, 1.0 - kProbabilityClamp);
  });
}

CauseModel::CauseModel(int kappa, std::vector<std::string> columns,
                       std::vector<Interaction> interactions, std::vector<LogisticFit> fits)
    : kappa_(kappa),
      columns_(std::move(columns)),
      interactions_(std::move(interactions)),
      fits_(std::move(fits)) {
  const std::size_t expected = kappa_ == 1 ? 0 : (kappa_ == 2 ? 1 : static_cast<std::size_t>(kappa_));
  if (kappa_ < 1 || fits_.size() != expected) {
    throw std::invalid_argument("CauseModel: expected " + std::to_string(expected) +
                                " logistic fits for kappa = " + std::to_string(kappa_));
  }
}

CauseModel CauseModel::constant(int kappa) {
  if (kappa != 1) throw std::invalid_argument("CauseModel::constant supports kappa = 1 only");
  return CauseModel(1, {}, {}, {});
}

Matrix CauseModel::probabilities(const Dataset& d, const DesignOptions& options) const {
  if (kappa_ == 1) return Matrix::Ones(static_cast<Eigen::Index>(d.n()), 1);
  return probabilities_from_design(build_design(d, columns_, true, interactions_, options));
}

Matrix CauseModel::probabilities_from_design(const Matrix& design) const {
  const Eigen::Index n = design.rows();
  Matrix phi(n, kappa_);
  if (kappa_ == 1) {
    phi.setOnes();
  } else if (kappa_ == 2) {
    const Vector p2 = predict_prob(fits_[0], design);
    phi.col(1) = p2;
    phi.col(0) = Vector::Ones(n) - p2;
  } else {
    for (int k = 0; k < kappa_; ++k) phi.col(k) = predict_prob(fits_[static_cast<std::size_t>(k)], design);
    for (Eigen::Index i = 0; i < n; ++i) phi.row(i) /= phi.row(i).sum();
  }
  return phi;
}

CauseModel fit_cause_model(const Dataset& d, const std::vector<std::string>& columns,
                           const std::vector<Interaction>& interactions) {
  const int kappa = d.kappa();
  for (int k = 1; k <= kappa; ++k) {
    if (d.event_count(k) == 0) {
      throw DegenerateSampleError("cause model: cause " + std::to_string(k) + " has no observed events");
    }
  }
  if (kappa == 1) return CauseModel::constant(1);
  const Dataset events = d.uncensored();
  const Matrix X = build_design(events, columns, true, interactions);
  auto indicator = [&](int k) {
    Vector y(X.rows());
    for (std::size_t i = 0; i < events.n(); ++i) y[static_cast<Eigen::Index>(i)] = events[i].cause == k ? 1.0 : 0.0;
    return y;
  };
  std::vector<LogisticFit> fits;
  if (kappa == 2) {
    fits.push_back(fit_logistic(X, indicator(2)));
  } else {
    for (int k = 1; k <= kappa; ++k) fits.push_back(fit_logistic(X, indicator(k)));
  }
  return CauseModel(kappa, columns, interactions, std::move(fits));
}

CauseModel fit_cause_model(const Dataset& d, const ModelSpec& spec) {
  return fit_cause_model(d, spec.cause_cols, spec.interactions);
}

}  // namespace critr
