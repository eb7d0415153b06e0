#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "critr/data.hpp"
#include "critr/design.hpp"
#include "critr/types.hpp"

namespace critr {

inline constexpr double kProbabilityClamp = 1e-6;

struct LogisticFit {
  Vector coefficients;  // log-odds scale
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
  // Set when some |linear predictor| > 30 at the solution (quasi-separation).
  std::optional<std::string> warning;
};

struct IrlsOptions {
  int max_iterations = 100;
  double score_tolerance = 1e-8;
  double step_tolerance = 1e-10;
};

// Bernoulli maximum likelihood by iteratively reweighted least squares.
// Throws SingularSystemError when X'X is numerically rank deficient.
LogisticFit fit_logistic(const Matrix& X, const Vector& y, const IrlsOptions& options = {});

// expit(X b), clamped to [1e-6, 1 - 1e-6].
Vector predict_prob(const LogisticFit& fit, const Matrix& X);

// Smallest over largest singular value of a square matrix (0 when singular).
double reciprocal_condition(const Matrix& A);

inline double expit(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Cause-of-failure probabilities φ_k(x) = P(K = k | X = x).
//
// kappa = 1 is the constant model. For kappa = 2 a single logistic fit models
// P(K = 2 | x) and φ_1 = 1 − φ_2. For kappa > 2 one-vs-rest fits are
// renormalised to sum to one (an approximation to a multinomial fit).
class CauseModel {
 public:
  CauseModel() = default;
  CauseModel(int kappa, std::vector<std::string> columns, std::vector<Interaction> interactions,
             std::vector<LogisticFit> fits);

  static CauseModel constant(int kappa = 1);

  [[nodiscard]] int kappa() const noexcept { return kappa_; }
  [[nodiscard]] const std::vector<std::string>& columns() const noexcept { return columns_; }
  [[nodiscard]] const std::vector<Interaction>& interactions() const noexcept { return interactions_; }
  [[nodiscard]] const std::vector<LogisticFit>& fits() const noexcept { return fits_; }

  // n × kappa matrix of φ_k for every row of `d`.
  [[nodiscard]] Matrix probabilities(const Dataset& d, const DesignOptions& options = {}) const;
  // Same, from a prebuilt design (intercept + columns()).
  [[nodiscard]] Matrix probabilities_from_design(const Matrix& design) const;

 private:
  int kappa_ = 1;
  std::vector<std::string> columns_;
  std::vector<Interaction> interactions_;
  std::vector<LogisticFit> fits_;
};

// Fits the cause model on uncensored rows using `columns` (intercept added).
// Throws DegenerateSampleError naming a cause with no observed events.
CauseModel fit_cause_model(const Dataset& d, const std::vector<std::string>& columns,
                           const std::vector<Interaction>& interactions);
CauseModel fit_cause_model(const Dataset& d, const ModelSpec& spec);

}  // namespace critr
