#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "critr/data.hpp"
#include "critr/random.hpp"
#include "critr/types.hpp"

namespace critr {

// Any estimate computed from a dataset; failures are signalled by throwing
// critr::Error or returning non-finite entries.
using Statistic = std::function<Vector(const Dataset&)>;

struct BootstrapOptions {
  int replicates = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;
  unsigned threads = 1;
  double max_failure_fraction = 0.05;
};

struct BootstrapResult {
  Vector estimate;  // statistic on the original data
  Matrix samples;   // replicates × p; rows of failed replicates are NaN
  std::vector<bool> failed;
  int failures = 0;
  double level = 0.95;
  std::uint64_t seed = 0;
  Vector lo;
  Vector hi;

  [[nodiscard]] int replicates() const { return static_cast<int>(samples.rows()); }
  // Successful replicates of parameter j.
  [[nodiscard]] std::vector<double> column(Eigen::Index j) const;
};

// r clusters drawn with replacement; copies get fresh ids 1..r in draw order.
Dataset resample_clusters(const Dataset& d, Rng& rng);
// Replicate b of a bootstrap with this seed (rng seeded by derive_seed(seed, b)).
Dataset bootstrap_replicate(const Dataset& d, std::uint64_t seed, int b);

// Throws BootstrapFailureError when more than max_failure_fraction of the
// replicates fail, and DegenerateSampleError with fewer than two clusters.
BootstrapResult cluster_bootstrap(const Dataset& d, const Statistic& statistic,
                                  const BootstrapOptions& options);

// Type-7 (linear interpolation) quantiles at (1 − level)/2 and (1 + level)/2.
std::pair<double, double> percentile_ci(std::vector<double> samples, double level);
double quantile(std::vector<double> samples, double prob);

void write_ci_table(std::ostream& out, const std::vector<std::string>& names, const BootstrapResult& result);

}  // namespace critr
