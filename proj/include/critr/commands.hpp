#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "critr/bootstrap.hpp"
#include "critr/design.hpp"
#include "critr/metrics.hpp"
#include "critr/regimes.hpp"

namespace critr {

struct FitOptions {
  EstimationOptions estimation;
  std::vector<RuleKind> regimes{RuleKind::weighted, RuleKind::greedy};
  int target_cause = 1;  // for the cause-specific regime
  int bootstrap = 0;
  bool bands = false;  // bootstrap bands for the benefit curves
  double level = 0.95;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct RegimeEvaluation {
  RuleKind kind = RuleKind::weighted;
  std::vector<int> decisions;
  std::optional<Vector> benefits;  // absent for the uniform regime
  RegimeMetrics metrics;
};

struct FitResult {
  RegimeSet regime;
  std::vector<std::string> blip_names;  // "cause<k>:<column>"
  Vector blip_estimates;
  std::vector<RegimeEvaluation> evaluations;
  std::optional<BootstrapResult> bootstrap;
  std::vector<std::string> statistic_names;  // blips, then pot/value per regime, then bands
};

// Names and stacked ψ of every blip in `rs`.
std::vector<std::string> blip_parameter_names(const RegimeSet& rs);
Vector stacked_blips(const RegimeSet& rs);

// Decisions, benefits and IPC-weighted metrics of each regime on `d`.
// Blips of `rs` (per-cause) define the oracle and value terms; the
// cause-specific, composite and treatment-dependent regimes are fitted on `d`.
std::vector<RegimeEvaluation> evaluate_regimes(const Dataset& d, const ModelSpec& spec, const RegimeSet& rs,
                                               const FitOptions& options, const Vector& p_event);

FitResult run_fit(const Dataset& d, const ModelSpec& spec, const FitOptions& options);

// Writes blips.csv, metrics.csv, benefit_<regime>.csv, regime.json and,
// with a bootstrap, ci.csv into `dir`.
void write_fit_outputs(const FitResult& fit, const Dataset& d, const std::filesystem::path& dir);

// Command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace critr
