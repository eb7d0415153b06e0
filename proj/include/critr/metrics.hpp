#pragma once

#include <span>

#include "critr/data.hpp"
#include "critr/regimes.hpp"
#include "critr/types.hpp"

namespace critr {

struct RegimeMetrics {
  double pot = 0.0;
  double value = 0.0;
  double effective_n = 0.0;  // (Σw)² / Σw²
};

// δ_i / P(Δ = 1 | x_i, a_i).
Vector ipc_weights(const Dataset& d, const Vector& p_event);

// Weighted share of subjects whose decision matches the oracle decision.
double estimate_pot(std::span<const int> rule, std::span<const int> oracle, const Vector& weights);

// Weighted mean of log T_i + (d_i − a_i) x_{ψ_{K_i}} ψ_{K_i}. `cause_benefits`
// is the n × kappa oracle benefit matrix of the regime set defining the blips.
double estimate_value(const Dataset& d, std::span<const int> rule, const Matrix& cause_benefits,
                      const Vector& weights);

// Both metrics for `rule` on `d`. Oracle decisions and blips come from
// `reference` (per-cause), which needs the cause on every weighted row.
RegimeMetrics evaluate_rule(const Dataset& d, std::span<const int> rule, const RegimeSet& reference,
                            const Vector& weights);

}  // namespace critr
