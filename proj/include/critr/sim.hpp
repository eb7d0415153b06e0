#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "critr/data.hpp"
#include "critr/design.hpp"
#include "critr/gee.hpp"
#include "critr/metrics.hpp"
#include "critr/regimes.hpp"

namespace critr {

enum class RandomEffect { normal, gamma };

// One data-generating mechanism: two covariates, logistic treatment, censoring
// indicator and cause of failure, and a cause-specific log-normal AFT with a
// cluster random intercept.
struct SimSetting {
  std::string name;
  int n_train = 1000;
  int n_test = 10000;
  int clusters = 50;
  double censoring_intercept = 1.73;
  std::array<double, 2> blip1{0.2, -0.2};  // (intercept, x1) for cause 1
  std::array<double, 2> blip2{0.2, 0.2};
  double tau2 = 0.25;    // random-intercept variance
  double sigma2 = 0.25;  // residual variance
  RandomEffect random_effect = RandomEffect::normal;
  std::optional<CorrelationKind> working_correlation;  // fitting side only
  double treatment_re_var = 0.0;
  double cause_intercept = 0.5;

  [[nodiscard]] double icc() const { return tau2 / (tau2 + sigma2); }
};

// Named settings: 1a 1b 2 3 4 5.1 5.2 6 7 8 9.1 9.2 9.3 10 optn.
SimSetting sim_setting(std::string_view name);
std::vector<std::string> sim_setting_names();

enum class SimKind { train, test };

// Per-row ground truth.
struct SimTruth {
  std::vector<int> cause;          // true K (also for censored rows)
  std::vector<double> prob_cause2; // P(K = 2 | x)
  std::vector<double> log_t0;      // counterfactual log time at a = 0, true K
  std::vector<double> log_t1;      // same at a = 1
  std::vector<double> blip1;       // true cause-1 blip at x
  std::vector<double> blip2;
  std::vector<int> oracle;         // 1(blip of the true cause > 0)
};

struct SimDataset {
  Dataset data;
  SimTruth truth;
};

// Clusters are uniform on 1..clusters; the test kind forces every event to
// be observed. Observed times are the failure times for all rows.
SimDataset simulate_dataset(const SimSetting& s, SimKind kind, std::uint64_t seed);
SimDataset simulate_dataset(const SimSetting& s, SimKind kind, std::uint64_t seed, int n);

void write_truth(const SimDataset& sim, std::ostream& out);

// The generating blips and cause model as a RegimeSet (zero cost).
RegimeSet true_regime_set(const SimSetting& s);

// Misspecification scenarios i–iv: nuisance and treatment-free models use
// x1 only or (x1, x2); the blip and cause models always use x1.
ModelSpec scenario_spec(std::string_view scenario);

struct StudyConfig {
  SimSetting setting;
  std::string scenario = "iv";
  int reps = 1000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<RuleKind> regimes{RuleKind::weighted, RuleKind::greedy, RuleKind::oracle, RuleKind::uniform};
  EstimationOptions estimation;  // correlation is replaced by the setting's override when present
};

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double sqrt_n_bias = 0.0;
  double sqrt_n_se = 0.0;
};

struct RegimeSummary {
  RuleKind regime = RuleKind::weighted;
  double pot = 0.0;
  double value = 0.0;
};

struct StudyResult {
  StudyConfig config;
  std::vector<std::string> parameter_names;
  Matrix estimates;  // reps × 4 blip coefficients; NaN rows for failed replicates
  std::vector<bool> failed;
  std::vector<std::string> failure_messages;
  int failures = 0;
  // reps × regimes, in config.regimes order
  Matrix pot;
  Matrix value;
  std::vector<ParameterSummary> parameters;
  std::vector<RegimeSummary> regimes;
};

StudyResult run_replication_study(const StudyConfig& config);

// Metrics of every requested regime fitted on `train`, evaluated on the
// uncensored `test` set against the generating regime set.
std::vector<RegimeMetrics> evaluate_on_test(const std::vector<RuleKind>& regimes, const Dataset& train,
                                            const RegimeSet& fitted, const ModelSpec& spec,
                                            const EstimationOptions& options, const SimDataset& test,
                                            const RegimeSet& truth, std::uint64_t uniform_seed);

void write_parameter_summary(const StudyResult& r, std::ostream& out, bool header = true);
void write_regime_summary(const StudyResult& r, std::ostream& out, bool header = true);
void write_replicates(const StudyResult& r, std::ostream& out);

}  // namespace critr
