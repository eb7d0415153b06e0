#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "critr/data.hpp"
#include "critr/design.hpp"
#include "critr/gee.hpp"
#include "critr/glm.hpp"
#include "critr/types.hpp"
#include "critr/weights.hpp"

namespace critr {

enum class RuleKind { oracle, weighted, greedy, uniform, cause_specific, composite, treatment_dependent };

RuleKind parse_rule_kind(std::string_view name);
const char* to_string(RuleKind kind);
std::vector<RuleKind> parse_rule_list(std::string_view list);

// How the blips of a RegimeSet were obtained. per_cause holds one blip per
// cause; the other two hold a single blip that drives every rule.
enum class RegimeScope { per_cause, cause_specific, composite };

const char* to_string(RegimeScope scope);
RegimeScope parse_regime_scope(std::string_view name);

struct BlipModel {
  int cause = 1;  // 0 for the composite endpoint
  std::vector<std::string> treatment_free_cols;
  std::vector<std::string> blip_cols;
  Vector beta;
  Vector psi;
  std::optional<GeeFit> fit;
};

struct RegimeSet {
  RegimeScope scope = RegimeScope::per_cause;
  std::vector<BlipModel> blips;
  CauseModel cause_model;
  CostThreshold cost;
  std::vector<Interaction> interactions;
  int target_cause = 0;  // cause_specific only

  [[nodiscard]] int kappa() const { return cause_model.kappa(); }
  [[nodiscard]] bool single_blip() const { return scope != RegimeScope::per_cause; }
  // Blip for cause k (1-based); single-blip sets return their only blip.
  [[nodiscard]] const BlipModel& blip(int k) const;
};

// Treatment and censoring models plus their fitted probabilities on the
// training rows: p_treat = P(A = 1 | x), p_event = P(Δ = 1 | a, x).
struct NuisanceModels {
  std::optional<LogisticFit> treatment;
  std::optional<LogisticFit> censoring;
  Vector p_treat;
  Vector p_event;
};

NuisanceModels fit_nuisance(const Dataset& d, const ModelSpec& spec);

struct EstimationOptions {
  WeightKind weights = WeightKind::overlap;
  GeeOptions gee;
};

// Full pipeline: nuisance fits, balancing weights, one weighted GEE per cause
// on log time restricted to that cause's events, and the cause model.
RegimeSet estimate_blips(const Dataset& d, const ModelSpec& spec, const EstimationOptions& options = {});
// Same, with nuisance probabilities supplied by the caller.
RegimeSet estimate_blips(const Dataset& d, const ModelSpec& spec, const NuisanceModels& nuisance,
                         const EstimationOptions& options = {});

// Competing events recoded as censored, censoring model refit, single blip
// for `target`.
RegimeSet cause_specific_regime(const Dataset& d, int target, const ModelSpec& spec,
                                const EstimationOptions& options = {});
// Causes ignored: one blip fitted on all events.
RegimeSet composite_regime(const Dataset& d, const ModelSpec& spec, const EstimationOptions& options = {});

// Pointwise rules. `oracle` holds the per-cause benefits x_{ψ_k} ψ_k and
// `phi` the cause probabilities of one subject.
double weighted_benefit(std::span<const double> phi, std::span<const double> oracle);
int modal_cause(std::span<const double> phi);  // 1-based, ties to the smallest
double greedy_benefit(std::span<const double> phi, std::span<const double> oracle);
inline int decide(double benefit, double threshold) { return benefit > threshold ? 1 : 0; }

// n × kappa matrix of x_{ψ_k} ψ_k (n × 1 for single-blip sets).
Matrix oracle_benefit_matrix(const RegimeSet& rs, const Dataset& d);

// Benefit of rule `kind` for every row of `d`. oracle needs an observed cause
// on every row; single-blip sets return their one benefit for any rule.
Vector rule_benefits(RuleKind kind, const RegimeSet& rs, const Dataset& d);
std::vector<int> rule_decisions(RuleKind kind, const RegimeSet& rs, const Dataset& d);

// Bernoulli(1/2) allocation, reproducible from the seed, independent of x.
class UniformRegime {
 public:
  explicit UniformRegime(std::uint64_t seed) : seed_(seed) {}
  [[nodiscard]] std::vector<int> decisions(std::size_t n) const;

 private:
  std::uint64_t seed_;
};

// d(x) = argmax_a Σ_k φ_k(x, a) Q_k(x, a), with the cause model refit using
// treatment as a covariate and Q_k from unweighted per-cause regressions.
class TreatmentDependentRule {
 public:
  TreatmentDependentRule(CauseModel cause_model, std::vector<BlipModel> outcome, CostThreshold cost,
                         std::vector<Interaction> interactions);

  [[nodiscard]] const CauseModel& cause_model() const noexcept { return cause_model_; }
  [[nodiscard]] const std::vector<BlipModel>& outcome_models() const noexcept { return outcome_; }

  // Σ_k φ_k(x, a) Q_k(x, a) for every row, at treatment a.
  [[nodiscard]] Vector objective(const Dataset& d, int a) const;
  // objective(1) − objective(0).
  [[nodiscard]] Vector benefits(const Dataset& d) const;
  // 1 iff the treated objective exceeds the untreated one by more than the
  // cost; ties give 0.
  [[nodiscard]] std::vector<int> decisions(const Dataset& d) const;

 private:
  CauseModel cause_model_;
  std::vector<BlipModel> outcome_;
  CostThreshold cost_;
  std::vector<Interaction> interactions_;
};

TreatmentDependentRule fit_treatment_dependent_rule(const Dataset& d, const ModelSpec& spec);

struct BenefitRow {
  std::size_t subject_id = 0;
  std::optional<int> cause;
  double benefit = 0.0;
  int decision = 0;
  std::optional<double> lo;
  std::optional<double> hi;
};

using BenefitCurve = std::vector<BenefitRow>;

// One row per uncensored subject of `d`, sorted by increasing benefit (stable).
// `bands`, when given, holds (lo, hi) for every row of `d`.
BenefitCurve benefit_curve(const Dataset& d, const Vector& benefits, std::span<const int> decisions,
                           const std::vector<std::pair<double, double>>* bands = nullptr);

void write_benefit_curve(const BenefitCurve& curve, std::ostream& out);

}  // namespace critr
