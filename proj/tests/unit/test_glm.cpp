#include <doctest.h>

#include <cmath>

#include "critr/error.hpp"
#include "critr/glm.hpp"
#include "critr/random.hpp"
#include "critr/sim.hpp"

using namespace critr;

namespace {

Vector ys(std::initializer_list<double> v) {
  Vector y(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const double x : v) y[i++] = x;
  return y;
}

}  // namespace

TEST_CASE("intercept-only logistic fits recover the logit of the mean") {
  const Matrix X = Matrix::Ones(10, 1);
  const auto half = fit_logistic(X, ys({1, 0, 1, 0, 1, 0, 1, 0, 1, 0}));
  CHECK(half.converged);
  CHECK(half.coefficients[0] == doctest::Approx(0.0).epsilon(1e-12));
  const auto eighty = fit_logistic(X, ys({1, 1, 1, 1, 1, 1, 1, 1, 0, 0}));
  CHECK(eighty.coefficients[0] == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("predictions are clamped and checked") {
  LogisticFit fit;
  fit.coefficients = Vector::Zero(2);
  const Matrix X = Matrix::Ones(3, 2);
  CHECK(predict_prob(fit, X).isApproxToConstant(0.5));
  fit.coefficients << 100.0, 0.0;
  CHECK(predict_prob(fit, X)[0] == 1.0 - kProbabilityClamp);
  fit.coefficients << -100.0, 0.0;
  CHECK(predict_prob(fit, X)[0] == kProbabilityClamp);
  CHECK_THROWS(predict_prob(fit, Matrix::Ones(3, 3)));
}

TEST_CASE("rank-deficient designs are rejected") {
  Matrix X(4, 2);
  X << 1, 2, 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(fit_logistic(X, ys({0, 1, 0, 1})), SingularSystemError);
}

TEST_CASE("separation gives a warning, not an error") {
  Matrix X(6, 2);
  X << 1, -3, 1, -2, 1, -1, 1, 1, 1, 2, 1, 3;
  const auto fit = fit_logistic(X, ys({0, 0, 0, 1, 1, 1}));
  CHECK(fit.warning.has_value());
  CHECK(fit.coefficients.allFinite());
}

TEST_CASE("score equations hold at the solution") {
  Rng rng(11);
  std::normal_distribution<double> z;
  const int n = 2000;
  Matrix X(n, 3);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = z(rng);
    X(i, 2) = z(rng);
    const double p = expit(-0.3 + 0.8 * X(i, 1) - 0.5 * X(i, 2));
    y[i] = std::uniform_real_distribution<double>()(rng) < p ? 1.0 : 0.0;
  }
  const auto fit = fit_logistic(X, y);
  REQUIRE(fit.converged);
  const Vector p = predict_prob(fit, X);
  CHECK((X.transpose() * (y - p)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(p.mean() == doctest::Approx(y.mean()).epsilon(1e-9));
}

TEST_CASE("treatment and cause mechanisms are recovered at large n") {
  const auto sim = simulate_dataset(sim_setting("1a"), SimKind::train, 2024, 100000);
  const auto& d = sim.data;
  const std::vector<std::string> both{"x1", "x2"};
  const Matrix X = build_design(d, both, true);
  Vector a(X.rows());
  for (std::size_t i = 0; i < d.n(); ++i) a[static_cast<Eigen::Index>(i)] = d[i].treatment;
  const auto treat = fit_logistic(X, a);
  CHECK(treat.coefficients[0] == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(treat.coefficients[1] - 1.0) < 0.05);
  CHECK(std::abs(treat.coefficients[2] - 1.0) < 0.05);

  const auto cm = fit_cause_model(d, {"x1"}, {});
  CHECK(std::abs(cm.fits()[0].coefficients[1] - 1.0) < 0.05);
  const Matrix phi = cm.probabilities(d);
  for (Eigen::Index i = 0; i < phi.rows(); i += 997) {
    CHECK(phi.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(phi(i, 0) > 0.0);
    CHECK(phi(i, 0) < 1.0);
  }
}

TEST_CASE("cause model in the rare-cause setting") {
  const auto sim = simulate_dataset(sim_setting("10"), SimKind::train, 99, 100000);
  const auto cm = fit_cause_model(sim.data, {"x1"}, {});
  // Events are thinned by censoring, which favours cause 1 only slightly.
  CHECK(cm.probabilities(sim.data).col(0).mean() == doctest::Approx(0.10).epsilon(0.1));
}

TEST_CASE("cause model with an absent cause names it") {
  std::vector<SubjectRecord> recs;
  for (int i = 0; i < 10; ++i) {
    SubjectRecord r;
    r.id = static_cast<std::size_t>(i) + 1;
    r.covariates = {static_cast<double>(i)};
    r.delta = 1;
    r.observed_time = 1.0;
    r.cause = 1;
    r.cluster = 1;
    recs.push_back(r);
  }
  const Dataset d({"x1"}, recs, 2);
  try {
    fit_cause_model(d, {"x1"}, {});
    FAIL("expected an error");
  } catch (const DegenerateSampleError& e) {
    CHECK(std::string(e.what()).find("cause 2") != std::string::npos);
  }
}

TEST_CASE("cause independent of covariates gives the empirical fraction") {
  std::vector<SubjectRecord> recs;
  Rng rng(5);
  std::normal_distribution<double> z;
  int ones = 0;
  for (int i = 0; i < 4000; ++i) {
    SubjectRecord r;
    r.id = static_cast<std::size_t>(i) + 1;
    r.covariates = {z(rng)};
    r.delta = 1;
    r.observed_time = 1.0;
    r.cause = (rng() % 10) < 3 ? 1 : 2;
    ones += r.cause == 1;
    r.cluster = 1;
    recs.push_back(r);
  }
  const Dataset d({"x1"}, recs);
  const auto cm = fit_cause_model(d, {"x1"}, {});
  const Matrix phi = cm.probabilities(d);
  const double frac = ones / 4000.0;
  CHECK(phi.col(0).mean() == doctest::Approx(frac).epsilon(1e-6));
  CHECK(std::abs(phi(0, 0) - frac) < 0.03);
}

TEST_CASE("three causes are renormalised one-vs-rest fits") {
  std::vector<SubjectRecord> recs;
  Rng rng(8);
  std::normal_distribution<double> z;
  for (int i = 0; i < 3000; ++i) {
    SubjectRecord r;
    r.id = static_cast<std::size_t>(i) + 1;
    r.covariates = {z(rng)};
    r.delta = 1;
    r.observed_time = 1.0;
    r.cause = 1 + static_cast<int>(rng() % 3);
    r.cluster = 1;
    recs.push_back(r);
  }
  const Dataset d({"x1"}, recs);
  const auto cm = fit_cause_model(d, {"x1"}, {});
  CHECK(cm.fits().size() == 3);
  const Matrix phi = cm.probabilities(d);
  CHECK((phi.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}
