#pragma once

#include <functional>
#include <span>
#include <string_view>

#include "critr/types.hpp"

namespace critr {

enum class WeightKind { overlap, ipw };

WeightKind parse_weight_kind(std::string_view name);
const char* to_string(WeightKind kind);

struct WeightVector {
  Vector values;
  WeightKind kind = WeightKind::overlap;
};

// p_treat[i] = P(A = 1 | x_i); p_delta[i] = fitted probability of the
// subject's observed delta value given (a_i, x_i).
WeightVector overlap_weights(std::span<const int> a, const Vector& p_treat, const Vector& p_delta);
WeightVector ipw_weights(std::span<const int> a, const Vector& p_treat, const Vector& p_delta);
WeightVector make_weights(WeightKind kind, std::span<const int> a, const Vector& p_treat,
                          const Vector& p_delta);

// P(Δ = δ_i | a_i, x_i) from the fitted P(Δ = 1 | a_i, x_i).
Vector observed_delta_probability(std::span<const int> delta, const Vector& p_event);

// Weight as a function of (delta, a, point index) and nuisance functions of
// the point index, so that the check can run on arbitrary covariate samples.
using CellWeight = std::function<double(int delta, int a, std::size_t i)>;
using TreatProb = std::function<double(std::size_t i)>;
using EventProb = std::function<double(int a, std::size_t i)>;

// Largest spread, over points 0..count-1, among the four products
// P(Δ=δ | a, x) P(A=a | x) w(δ, a, x) for δ, a ∈ {0, 1}. A weight satisfying
// the balancing condition gives 0 up to rounding.
double check_balancing(const CellWeight& w, const TreatProb& b, const EventProb& c, std::size_t count);

}  // namespace critr
