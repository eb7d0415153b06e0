#include "critr/metrics.hpp"

#include <algorithm>

#include <cmath>
#include <stdexcept>
#include <string>

#include "critr/error.hpp"

namespace critr {

namespace {

double weight_total(const Vector& w) {
  const double total = w.sum();
  if (!(total > 0.0)) throw UndefinedMetricError("all evaluation weights are zero");
  return total;
}

}  // namespace

Vector ipc_weights(const Dataset& d, const Vector& p_event) {
  if (p_event.size() != static_cast<Eigen::Index>(d.n())) throw std::invalid_argument("ipc_weights: length mismatch");
  Vector w(p_event.size());
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    w[j] = d[i].delta == 1 ? 1.0 / p_event[j] : 0.0;
  }
  return w;
}

double estimate_pot(std::span<const int> rule, std::span<const int> oracle, const Vector& weights) {
  if (rule.size() != oracle.size() || static_cast<Eigen::Index>(rule.size()) != weights.size()) {
    throw std::invalid_argument("estimate_pot: length mismatch");
  }
  const double total = weight_total(weights);
  double hit = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    if (rule[i] == oracle[i]) hit += weights[static_cast<Eigen::Index>(i)];
  }
  // Summation order can push a full match a few ulps past 1.
  return std::min(hit / total, 1.0);
}

double estimate_value(const Dataset& d, std::span<const int> rule, const Matrix& cause_benefits,
                      const Vector& weights) {
  if (rule.size() != d.n() || weights.size() != static_cast<Eigen::Index>(d.n()) ||
      cause_benefits.rows() != static_cast<Eigen::Index>(d.n())) {
    throw std::invalid_argument("estimate_value: length mismatch");
  }
  const double total = weight_total(weights);
  double acc = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    if (weights[j] == 0.0) continue;
    const auto& r = d[i];
    if (r.delta != 1 || !r.cause) throw Error("value: weighted row " + std::to_string(i + 1) + " has no observed event");
    const double blip = cause_benefits.cols() == 1 ? cause_benefits(j, 0) : cause_benefits(j, *r.cause - 1);
    acc += weights[j] * (std::log(r.observed_time) + (rule[i] - r.treatment) * blip);
  }
  return acc / total;
}

RegimeMetrics evaluate_rule(const Dataset& d, std::span<const int> rule, const RegimeSet& reference,
                            const Vector& weights) {
  const Matrix benefits = oracle_benefit_matrix(reference, d);
  const Vector zeta = reference.cost.values(d);
  std::vector<int> oracle(d.n(), 0);
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    if (weights[j] == 0.0) continue;
    const auto& cause = d[i].cause;
    if (!cause) throw Error("POT: weighted row " + std::to_string(i + 1) + " has no observed cause");
    const double b = benefits.cols() == 1 ? benefits(j, 0) : benefits(j, *cause - 1);
    oracle[i] = decide(b, zeta[j]);
  }
  RegimeMetrics m;
  m.pot = estimate_pot(rule, oracle, weights);
  m.value = estimate_value(d, rule, benefits, weights);
  m.effective_n = weights.sum() * weights.sum() / weights.squaredNorm();
  return m;
}

}  // namespace critr
