#include "critr/weights.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace critr {

namespace {

void check_lengths(std::span<const int> a, const Vector& p_treat, const Vector& p_delta) {
  const auto n = static_cast<Eigen::Index>(a.size());
  if (p_treat.size() != n || p_delta.size() != n) {
    throw std::invalid_argument("weights: length mismatch (a " + std::to_string(n) + ", pA " +
                                std::to_string(p_treat.size()) + ", pDelta " +
                                std::to_string(p_delta.size()) + ")");
  }
}

}  // namespace

WeightKind parse_weight_kind(std::string_view name) {
  if (name == "overlap") return WeightKind::overlap;
  if (name == "ipw") return WeightKind::ipw;
  throw std::invalid_argument("unknown weight kind '" + std::string(name) + "' (overlap|ipw)");
}

const char* to_string(WeightKind kind) { return kind == WeightKind::overlap ? "overlap" : "ipw"; }

WeightVector overlap_weights(std::span<const int> a, const Vector& p_treat, const Vector& p_delta) {
  check_lengths(a, p_treat, p_delta);
  WeightVector w{Vector(p_treat.size()), WeightKind::overlap};
  for (Eigen::Index i = 0; i < w.values.size(); ++i) {
    w.values[i] = std::abs(a[static_cast<std::size_t>(i)] - p_treat[i]) / p_delta[i];
  }
  return w;
}

WeightVector ipw_weights(std::span<const int> a, const Vector& p_treat, const Vector& p_delta) {
  check_lengths(a, p_treat, p_delta);
  WeightVector w{Vector(p_treat.size()), WeightKind::ipw};
  for (Eigen::Index i = 0; i < w.values.size(); ++i) {
    const double pa = a[static_cast<std::size_t>(i)] == 1 ? p_treat[i] : 1.0 - p_treat[i];
    w.values[i] = 1.0 / (pa * p_delta[i]);
  }
  return w;
}

WeightVector make_weights(WeightKind kind, std::span<const int> a, const Vector& p_treat,
                          const Vector& p_delta) {
  return kind == WeightKind::overlap ? overlap_weights(a, p_treat, p_delta)
                                     : ipw_weights(a, p_treat, p_delta);
}

Vector observed_delta_probability(std::span<const int> delta, const Vector& p_event) {
  if (p_event.size() != static_cast<Eigen::Index>(delta.size())) {
    throw std::invalid_argument("observed_delta_probability: length mismatch");
  }
  Vector out(p_event.size());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    out[i] = delta[static_cast<std::size_t>(i)] == 1 ? p_event[i] : 1.0 - p_event[i];
  }
  return out;
}

double check_balancing(const CellWeight& w, const TreatProb& b, const EventProb& c, std::size_t count) {
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    double lo = INFINITY, hi = -INFINITY;
    for (int delta = 0; delta <= 1; ++delta) {
      for (int a = 0; a <= 1; ++a) {
        const double pd = delta == 1 ? c(a, i) : 1.0 - c(a, i);
        const double pa = a == 1 ? b(i) : 1.0 - b(i);
        const double v = pd * pa * w(delta, a, i);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

}  // namespace critr
