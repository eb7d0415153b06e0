#include "critr/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "critr/csv.hpp"
#include "critr/error.hpp"
#include "critr/parallel.hpp"

namespace critr {

std::vector<double> BootstrapResult::column(Eigen::Index j) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index b = 0; b < samples.rows(); ++b) {
    if (!failed[static_cast<std::size_t>(b)]) out.push_back(samples(b, j));
  }
  return out;
}

Dataset resample_clusters(const Dataset& d, Rng& rng) {
  std::vector<const std::vector<std::size_t>*> groups;
  groups.reserve(d.cluster_count());
  for (const auto& [id, rows] : d.cluster_index()) groups.push_back(&rows);
  const std::size_t r = groups.size();
  if (r == 0) throw DegenerateSampleError("cannot resample an empty dataset");
  std::vector<SubjectRecord> records;
  records.reserve(d.n());
  for (std::size_t c = 0; c < r; ++c) {
    // Unbiased draw on {0..r-1}; libstdc++ distributions are avoided so
    // replicate draws do not depend on the standard library.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % r;
    std::uint64_t u;
    do u = rng(); while (u >= limit);
    for (const std::size_t i : *groups[u % r]) {
      records.push_back(d[i]);
      records.back().cluster = static_cast<int>(c + 1);
    }
  }
  return d.with_records(std::move(records));
}

Dataset bootstrap_replicate(const Dataset& d, std::uint64_t seed, int b) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
  return resample_clusters(d, rng);
}

double quantile(std::vector<double> samples, double prob) {
  if (samples.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(samples.begin(), samples.end());
  const double h = (static_cast<double>(samples.size()) - 1.0) * std::clamp(prob, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, samples.size() - 1);
  return samples[lo] + (h - static_cast<double>(lo)) * (samples[hi] - samples[lo]);
}

std::pair<double, double> percentile_ci(std::vector<double> samples, double level) {
  if (!(level >= 0.0 && level < 1.0)) throw std::invalid_argument("CI level must lie in [0, 1)");
  const double tail = (1.0 - level) / 2.0;
  return {quantile(samples, tail), quantile(samples, 1.0 - tail)};
}

BootstrapResult cluster_bootstrap(const Dataset& d, const Statistic& statistic,
                                  const BootstrapOptions& options) {
  if (d.cluster_count() < 2) throw DegenerateSampleError("cluster bootstrap needs at least two clusters");
  if (options.replicates < 1) throw std::invalid_argument("bootstrap needs at least one replicate");
  BootstrapResult result;
  result.level = options.level;
  result.seed = options.seed;
  result.estimate = statistic(d);
  const Eigen::Index p = result.estimate.size();
  const auto B = static_cast<std::size_t>(options.replicates);
  result.samples = Matrix::Constant(static_cast<Eigen::Index>(B), p, std::numeric_limits<double>::quiet_NaN());
  std::vector<char> failed(B, 0);

  parallel_for(B, options.threads, [&](std::size_t b) {
    const Dataset replicate = bootstrap_replicate(d, options.seed, static_cast<int>(b));
    try {
      const Vector v = statistic(replicate);
      if (v.size() != p) throw std::logic_error("bootstrap statistic changed length");
      if (!v.allFinite()) {
        failed[b] = 1;
        return;
      }
      result.samples.row(static_cast<Eigen::Index>(b)) = v.transpose();
    } catch (const Error&) {
      failed[b] = 1;
    }
  });

  result.failed.assign(failed.begin(), failed.end());
  result.failures = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  if (static_cast<double>(result.failures) > options.max_failure_fraction * static_cast<double>(B)) {
    throw BootstrapFailureError(std::to_string(result.failures) + " of " + std::to_string(B) +
                                " bootstrap replicates failed");
  }
  result.lo.resize(p);
  result.hi.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto [lo, hi] = percentile_ci(result.column(j), options.level);
    result.lo[j] = lo;
    result.hi[j] = hi;
  }
  return result;
}

void write_ci_table(std::ostream& out, const std::vector<std::string>& names, const BootstrapResult& result) {
  if (static_cast<Eigen::Index>(names.size()) != result.estimate.size()) {
    throw std::invalid_argument("write_ci_table: name count does not match the estimate");
  }
  out << "parameter,estimate,lo,hi,B,failures\n";
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    out << csv::escape(names[j]) << ',' << csv::format_double(result.estimate[k]) << ','
        << csv::format_double(result.lo[k]) << ',' << csv::format_double(result.hi[k]) << ','
        << result.replicates() << ',' << result.failures << '\n';
  }
}

}  // namespace critr
