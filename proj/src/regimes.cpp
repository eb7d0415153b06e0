#include "critr/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "critr/csv.hpp"
#include "critr/error.hpp"
#include "critr/random.hpp"

namespace critr {

namespace {

std::vector<int> treatments(const Dataset& d) {
  std::vector<int> a(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) a[i] = d[i].treatment;
  return a;
}

std::vector<int> deltas(const Dataset& d) {
  std::vector<int> out(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) out[i] = d[i].delta;
  return out;
}

// log of the observed time on event rows; 0 elsewhere (those rows carry no weight).
Vector log_times(const Dataset& d) {
  Vector y(static_cast<Eigen::Index>(d.n()));
  for (std::size_t i = 0; i < d.n(); ++i) {
    y[static_cast<Eigen::Index>(i)] = d[i].delta == 1 ? std::log(d[i].observed_time) : 0.0;
  }
  return y;
}

Vector binary_response(const Dataset& d, int (*get)(const SubjectRecord&)) {
  Vector y(static_cast<Eigen::Index>(d.n()));
  for (std::size_t i = 0; i < d.n(); ++i) y[static_cast<Eigen::Index>(i)] = get(d[i]);
  return y;
}

// Keeps w on event rows whose cause passes `keep`, zero elsewhere.
Vector mask_weights(const Dataset& d, const Vector& w, std::optional<int> cause) {
  Vector out = Vector::Zero(w.size());
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& r = d[i];
    if (r.delta == 1 && (!cause || r.cause == cause)) out[static_cast<Eigen::Index>(i)] = w[static_cast<Eigen::Index>(i)];
  }
  return out;
}

BlipModel fit_blip(const Dataset& d, int cause, const std::vector<std::string>& tf_cols,
                   const std::vector<std::string>& blip_cols, const std::vector<Interaction>& interactions,
                   const Vector& w, const GeeOptions& options) {
  const Matrix Xb = build_design(d, tf_cols, true, interactions);
  const Matrix Xpsi = build_design(d, blip_cols, true, interactions);
  const auto a = treatments(d);
  const auto clusters = d.clusters();
  GeeFit fit = fit_weighted_gee(Xb, Xpsi, a, log_times(d), w, clusters, options);
  BlipModel blip;
  blip.cause = cause;
  blip.treatment_free_cols = tf_cols;
  blip.blip_cols = blip_cols;
  blip.beta = fit.beta;
  blip.psi = fit.psi;
  blip.fit = std::move(fit);
  return blip;
}

Vector balancing_weights(const Dataset& d, const NuisanceModels& nuisance, WeightKind kind) {
  if (nuisance.p_treat.size() != static_cast<Eigen::Index>(d.n()) ||
      nuisance.p_event.size() != static_cast<Eigen::Index>(d.n())) {
    throw std::invalid_argument("nuisance probabilities do not match the dataset size");
  }
  const auto a = treatments(d);
  const auto delta = deltas(d);
  return make_weights(kind, a, nuisance.p_treat, observed_delta_probability(delta, nuisance.p_event)).values;
}

}  // namespace

RuleKind parse_rule_kind(std::string_view name) {
  if (name == "oracle") return RuleKind::oracle;
  if (name == "weighted") return RuleKind::weighted;
  if (name == "greedy") return RuleKind::greedy;
  if (name == "uniform") return RuleKind::uniform;
  if (name == "cause_specific") return RuleKind::cause_specific;
  if (name == "composite") return RuleKind::composite;
  if (name == "treatment_dependent") return RuleKind::treatment_dependent;
  throw std::invalid_argument("unknown regime '" + std::string(name) + "'");
}

const char* to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::oracle: return "oracle";
    case RuleKind::weighted: return "weighted";
    case RuleKind::greedy: return "greedy";
    case RuleKind::uniform: return "uniform";
    case RuleKind::cause_specific: return "cause_specific";
    case RuleKind::composite: return "composite";
    case RuleKind::treatment_dependent: return "treatment_dependent";
  }
  return "?";
}

std::vector<RuleKind> parse_rule_list(std::string_view list) {
  std::vector<RuleKind> out;
  std::stringstream ss{std::string(list)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = csv::trim(item);
    if (t.empty()) continue;
    const auto kind = parse_rule_kind(t);
    if (std::find(out.begin(), out.end(), kind) == out.end()) out.push_back(kind);
  }
  if (out.empty()) throw std::invalid_argument("empty regime list");
  return out;
}

const char* to_string(RegimeScope scope) {
  switch (scope) {
    case RegimeScope::per_cause: return "per_cause";
    case RegimeScope::cause_specific: return "cause_specific";
    case RegimeScope::composite: return "composite";
  }
  return "?";
}

RegimeScope parse_regime_scope(std::string_view name) {
  if (name == "per_cause") return RegimeScope::per_cause;
  if (name == "cause_specific") return RegimeScope::cause_specific;
  if (name == "composite") return RegimeScope::composite;
  throw std::invalid_argument("unknown regime scope '" + std::string(name) + "'");
}

const BlipModel& RegimeSet::blip(int k) const {
  if (blips.empty()) throw std::logic_error("RegimeSet has no blips");
  if (single_blip()) return blips.front();
  if (k < 1 || k > static_cast<int>(blips.size())) {
    throw std::out_of_range("cause " + std::to_string(k) + " outside 1.." + std::to_string(blips.size()));
  }
  return blips[static_cast<std::size_t>(k - 1)];
}

NuisanceModels fit_nuisance(const Dataset& d, const ModelSpec& spec) {
  NuisanceModels out;
  const auto n = static_cast<Eigen::Index>(d.n());
  const Vector a = binary_response(d, [](const SubjectRecord& r) { return r.treatment; });
  if (a.sum() == 0.0 || a.sum() == static_cast<double>(n)) {
    throw DegenerateSampleError("treatment model: every subject has the same treatment");
  }
  out.treatment = fit_logistic(build_design(d, spec.treatment_cols, true, spec.interactions), a);
  out.p_treat = predict_prob(*out.treatment, build_design(d, spec.treatment_cols, true, spec.interactions));

  const Vector delta = binary_response(d, [](const SubjectRecord& r) { return r.delta; });
  if (delta.sum() == 0.0) throw DegenerateSampleError("no observed events");
  if (delta.sum() == static_cast<double>(n)) {
    // Nothing censored: P(Δ = 1) is 1 and IPC weights are all one.
    out.p_event = Vector::Ones(n);
  } else {
    const Matrix X = build_design(d, spec.censoring_cols, true, spec.interactions);
    out.censoring = fit_logistic(X, delta);
    out.p_event = predict_prob(*out.censoring, X);
  }
  return out;
}

RegimeSet estimate_blips(const Dataset& d, const ModelSpec& spec, const EstimationOptions& options) {
  spec.validate(d);
  return estimate_blips(d, spec, fit_nuisance(d, spec), options);
}

RegimeSet estimate_blips(const Dataset& d, const ModelSpec& spec, const NuisanceModels& nuisance,
                         const EstimationOptions& options) {
  RegimeSet rs;
  rs.scope = RegimeScope::per_cause;
  rs.cost = spec.cost;
  rs.interactions = spec.interactions;
  rs.cause_model = fit_cause_model(d, spec);
  const Vector w = balancing_weights(d, nuisance, options.weights);
  for (int k = 1; k <= d.kappa(); ++k) {
    rs.blips.push_back(fit_blip(d, k, spec.treatment_free(k), spec.blip(k), spec.interactions,
                                mask_weights(d, w, k), options.gee));
  }
  return rs;
}

RegimeSet cause_specific_regime(const Dataset& d, int target, const ModelSpec& spec,
                                const EstimationOptions& options) {
  if (target < 1 || target > d.kappa()) {
    throw std::invalid_argument("target cause " + std::to_string(target) + " outside 1.." +
                                std::to_string(d.kappa()));
  }
  spec.validate(d);
  std::vector<SubjectRecord> records = d.records();
  for (auto& r : records) {
    if (r.delta == 1 && r.cause != target) {
      r.delta = 0;
      r.cause.reset();
    }
  }
  const Dataset recoded = d.with_records(std::move(records));
  if (recoded.event_count() == 0) {
    throw DegenerateSampleError("cause-specific regime: cause " + std::to_string(target) +
                                " has no observed events");
  }
  const auto nuisance = fit_nuisance(recoded, spec);
  const Vector w = balancing_weights(recoded, nuisance, options.weights);
  RegimeSet rs;
  rs.scope = RegimeScope::cause_specific;
  rs.target_cause = target;
  rs.cost = spec.cost;
  rs.interactions = spec.interactions;
  rs.cause_model = CauseModel::constant(1);
  rs.blips.push_back(fit_blip(recoded, target, spec.treatment_free(target), spec.blip(target),
                              spec.interactions, mask_weights(recoded, w, std::nullopt), options.gee));
  return rs;
}

RegimeSet composite_regime(const Dataset& d, const ModelSpec& spec, const EstimationOptions& options) {
  spec.validate(d);
  std::vector<SubjectRecord> records = d.records();
  for (auto& r : records) {
    if (r.delta == 1) r.cause = 1;
  }
  const Dataset pooled(d.covariate_names(), std::move(records), 1, d.treatment_name());
  const auto nuisance = fit_nuisance(pooled, spec);
  const Vector w = balancing_weights(pooled, nuisance, options.weights);
  RegimeSet rs;
  rs.scope = RegimeScope::composite;
  rs.cost = spec.cost;
  rs.interactions = spec.interactions;
  rs.cause_model = CauseModel::constant(1);
  rs.blips.push_back(fit_blip(pooled, 0, spec.composite_treatment_free(), spec.composite_blip(),
                              spec.interactions, mask_weights(pooled, w, std::nullopt), options.gee));
  return rs;
}

double weighted_benefit(std::span<const double> phi, std::span<const double> oracle) {
  if (phi.size() != oracle.size()) throw std::invalid_argument("weighted_benefit: size mismatch");
  double b = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) b += phi[k] * oracle[k];
  return b;
}

int modal_cause(std::span<const double> phi) {
  if (phi.empty()) throw std::invalid_argument("modal_cause: no causes");
  std::size_t best = 0;
  for (std::size_t k = 1; k < phi.size(); ++k) {
    if (phi[k] > phi[best]) best = k;
  }
  return static_cast<int>(best) + 1;
}

double greedy_benefit(std::span<const double> phi, std::span<const double> oracle) {
  if (phi.size() != oracle.size()) throw std::invalid_argument("greedy_benefit: size mismatch");
  return oracle[static_cast<std::size_t>(modal_cause(phi) - 1)];
}

Matrix oracle_benefit_matrix(const RegimeSet& rs, const Dataset& d) {
  Matrix out(static_cast<Eigen::Index>(d.n()), static_cast<Eigen::Index>(rs.blips.size()));
  for (std::size_t k = 0; k < rs.blips.size(); ++k) {
    const auto& b = rs.blips[k];
    out.col(static_cast<Eigen::Index>(k)) = build_design(d, b.blip_cols, true, rs.interactions) * b.psi;
  }
  return out;
}

Vector rule_benefits(RuleKind kind, const RegimeSet& rs, const Dataset& d) {
  const Matrix oracle = oracle_benefit_matrix(rs, d);
  const auto n = oracle.rows();
  if (rs.single_blip()) return oracle.col(0);
  Vector out(n);
  switch (kind) {
    case RuleKind::oracle:
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& cause = d[static_cast<std::size_t>(i)].cause;
        if (!cause) throw Error("oracle rule needs the cause of failure (row " + std::to_string(i + 1) + ")");
        out[i] = oracle(i, *cause - 1);
      }
      return out;
    case RuleKind::weighted:
    case RuleKind::greedy: {
      const Matrix phi = rs.cause_model.probabilities(d);
      if (phi.cols() != oracle.cols()) throw std::logic_error("cause model and blips disagree on kappa");
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::span<const double> p(phi.row(i).data(), static_cast<std::size_t>(phi.cols()));
        const std::span<const double> o(oracle.row(i).data(), static_cast<std::size_t>(oracle.cols()));
        out[i] = kind == RuleKind::weighted ? weighted_benefit(p, o) : greedy_benefit(p, o);
      }
      return out;
    }
    default:
      throw std::invalid_argument(std::string("rule '") + to_string(kind) +
                                  "' is not evaluated from a per-cause regime set");
  }
}

std::vector<int> rule_decisions(RuleKind kind, const RegimeSet& rs, const Dataset& d) {
  const Vector b = rule_benefits(kind, rs, d);
  const Vector zeta = rs.cost.values(d);
  std::vector<int> out(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    out[i] = decide(b[static_cast<Eigen::Index>(i)], zeta[static_cast<Eigen::Index>(i)]);
  }
  return out;
}

std::vector<int> UniformRegime::decisions(std::size_t n) const {
  Rng rng(derive_seed(seed_, kUniformStream));
  std::vector<int> out(n);
  for (auto& v : out) v = static_cast<int>(rng() >> 63);
  return out;
}

TreatmentDependentRule::TreatmentDependentRule(CauseModel cause_model, std::vector<BlipModel> outcome,
                                               CostThreshold cost, std::vector<Interaction> interactions)
    : cause_model_(std::move(cause_model)),
      outcome_(std::move(outcome)),
      cost_(std::move(cost)),
      interactions_(std::move(interactions)) {
  if (static_cast<int>(outcome_.size()) != cause_model_.kappa()) {
    throw std::invalid_argument("treatment-dependent rule: one outcome model per cause required");
  }
}

Vector TreatmentDependentRule::objective(const Dataset& d, int a) const {
  const DesignOptions at{a};
  const Matrix phi = cause_model_.probabilities(d, at);
  Vector out = Vector::Zero(static_cast<Eigen::Index>(d.n()));
  for (std::size_t k = 0; k < outcome_.size(); ++k) {
    const auto& m = outcome_[k];
    Vector q = build_design(d, m.treatment_free_cols, true, interactions_, at) * m.beta;
    if (a == 1) q += build_design(d, m.blip_cols, true, interactions_, at) * m.psi;
    out += phi.col(static_cast<Eigen::Index>(k)).cwiseProduct(q);
  }
  return out;
}

Vector TreatmentDependentRule::benefits(const Dataset& d) const { return objective(d, 1) - objective(d, 0); }

std::vector<int> TreatmentDependentRule::decisions(const Dataset& d) const {
  const Vector b = benefits(d);
  const Vector zeta = cost_.values(d);
  std::vector<int> out(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    out[i] = decide(b[static_cast<Eigen::Index>(i)], zeta[static_cast<Eigen::Index>(i)]);
  }
  return out;
}

TreatmentDependentRule fit_treatment_dependent_rule(const Dataset& d, const ModelSpec& spec) {
  spec.validate(d);
  auto cols = spec.cause_cols;
  if (std::find(cols.begin(), cols.end(), d.treatment_name()) == cols.end()) cols.push_back(d.treatment_name());
  CauseModel cause_model = fit_cause_model(d, cols, spec.interactions);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(d.n()));
  GeeOptions ols;
  ols.correlation = CorrelationKind::independence;
  std::vector<BlipModel> outcome;
  for (int k = 1; k <= d.kappa(); ++k) {
    outcome.push_back(fit_blip(d, k, spec.treatment_free(k), spec.blip(k), spec.interactions,
                               mask_weights(d, ones, k), ols));
  }
  return TreatmentDependentRule(std::move(cause_model), std::move(outcome), spec.cost, spec.interactions);
}

BenefitCurve benefit_curve(const Dataset& d, const Vector& benefits, std::span<const int> decisions,
                           const std::vector<std::pair<double, double>>* bands) {
  if (benefits.size() != static_cast<Eigen::Index>(d.n()) || decisions.size() != d.n() ||
      (bands && bands->size() != d.n())) {
    throw std::invalid_argument("benefit_curve: inputs do not match the dataset size");
  }
  BenefitCurve curve;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& r = d[i];
    if (r.delta != 1) continue;
    BenefitRow row;
    row.subject_id = r.id;
    row.cause = r.cause;
    row.benefit = benefits[static_cast<Eigen::Index>(i)];
    row.decision = decisions[i];
    if (bands) {
      row.lo = (*bands)[i].first;
      row.hi = (*bands)[i].second;
    }
    curve.push_back(row);
  }
  std::stable_sort(curve.begin(), curve.end(),
                   [](const BenefitRow& x, const BenefitRow& y) { return x.benefit < y.benefit; });
  return curve;
}

void write_benefit_curve(const BenefitCurve& curve, std::ostream& out) {
  const bool with_ci = std::any_of(curve.begin(), curve.end(), [](const BenefitRow& r) { return r.lo.has_value(); });
  out << "subject_id,cause,benefit,decision";
  if (with_ci) out << ",lo95,hi95";
  out << '\n';
  for (const auto& r : curve) {
    out << r.subject_id << ',';
    if (r.cause) out << *r.cause;
    out << ',' << csv::format_double(r.benefit) << ',' << r.decision;
    if (with_ci) {
      out << ',' << (r.lo ? csv::format_double(*r.lo) : "") << ',' << (r.hi ? csv::format_double(*r.hi) : "");
    }
    out << '\n';
  }
}

}  // namespace critr
