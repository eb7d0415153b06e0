#include "critr/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

#include "critr/csv.hpp"
#include "critr/error.hpp"
#include "critr/parallel.hpp"
#include "critr/random.hpp"

namespace critr {

namespace {

int uniform_cluster(Rng& rng, int r) {
  const auto n = static_cast<std::uint64_t>(r);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t u;
  do u = rng(); while (u >= limit);
  return static_cast<int>(u % n) + 1;
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

int bernoulli(Rng& rng, double p) { return uniform01(rng) < p ? 1 : 0; }

SimSetting appendix_base(std::string name) {
  SimSetting s;
  s.name = std::move(name);
  s.blip1 = {0.6, -0.6};
  s.blip2 = {-0.6, -0.6};
  s.tau2 = 0.5;
  s.sigma2 = 0.5;
  return s;
}

}  // namespace

SimSetting sim_setting(std::string_view name) {
  SimSetting s;
  s.name = std::string(name);
  if (name == "1a") return s;
  if (name == "1b") {
    s.n_train = 5000;
    s.clusters = 250;
    return s;
  }
  if (name == "2") {
    s.blip1 = {3.0, -0.5};
    s.blip2 = {-1.0, 0.2};
    return s;
  }
  if (name == "3") {
    s.blip1 = {-0.5, -0.7};
    s.blip2 = {0.1, 0.08};
    return s;
  }
  if (name == "10") {
    s.blip1 = {1.0, -0.5};
    s.blip2 = {-3.0, 0.2};
    s.cause_intercept = 2.5;
    return s;
  }
  if (name == "optn") {
    s.n_train = 50000;
    s.clusters = 251;
    return s;
  }
  s = appendix_base(std::string(name));
  if (name == "4") return s;
  if (name == "5.1") {
    s.tau2 = 0.9;
    s.sigma2 = 0.1;
    return s;
  }
  if (name == "5.2") {
    s.tau2 = 0.1;
    s.sigma2 = 0.9;
    return s;
  }
  if (name == "6") {
    s.random_effect = RandomEffect::gamma;
    return s;
  }
  if (name == "7") {
    s.censoring_intercept = 0.0;
    return s;
  }
  if (name == "8") {
    s.working_correlation = CorrelationKind::independence;
    return s;
  }
  if (name == "9.1" || name == "9.2" || name == "9.3") {
    s.treatment_re_var = name == "9.1" ? 0.01 : (name == "9.2" ? 0.25 : 1.0);
    return s;
  }
  throw std::invalid_argument("unknown simulation setting '" + std::string(name) + "'");
}

std::vector<std::string> sim_setting_names() {
  return {"1a", "1b", "2", "3", "4", "5.1", "5.2", "6", "7", "8", "9.1", "9.2", "9.3", "10", "optn"};
}

SimDataset simulate_dataset(const SimSetting& s, SimKind kind, std::uint64_t seed) {
  return simulate_dataset(s, kind, seed, kind == SimKind::train ? s.n_train : s.n_test);
}

SimDataset simulate_dataset(const SimSetting& s, SimKind kind, std::uint64_t seed, int n) {
  if (n < 1 || s.clusters < 1) throw std::invalid_argument("simulate_dataset: empty sample");
  if (s.tau2 < 0.0 || s.sigma2 < 0.0 || s.treatment_re_var < 0.0) {
    throw std::invalid_argument("simulate_dataset: negative variance");
  }
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);

  std::vector<double> u(static_cast<std::size_t>(s.clusters) + 1, 0.0);
  std::vector<double> e(static_cast<std::size_t>(s.clusters) + 1, 0.0);
  for (int c = 1; c <= s.clusters; ++c) {
    if (s.random_effect == RandomEffect::normal) {
      u[static_cast<std::size_t>(c)] = std::sqrt(s.tau2) * z(rng);
    } else if (s.tau2 > 0.0) {
      std::gamma_distribution<double> g(s.tau2, 1.0);
      u[static_cast<std::size_t>(c)] = g(rng) - s.tau2;
    }
    if (s.treatment_re_var > 0.0) e[static_cast<std::size_t>(c)] = std::sqrt(s.treatment_re_var) * z(rng);
  }

  const double sigma = std::sqrt(s.sigma2);
  std::vector<SubjectRecord> records;
  records.reserve(static_cast<std::size_t>(n));
  SimTruth t;
  for (int j = 0; j < n; ++j) {
    SubjectRecord rec;
    rec.id = static_cast<std::size_t>(j) + 1;
    rec.cluster = uniform_cluster(rng, s.clusters);
    const double x1 = z(rng);
    const double x2 = 2.0 * z(rng);
    rec.covariates = {x1, x2};
    rec.treatment = bernoulli(rng, expit(0.5 + x1 + x2 + e[static_cast<std::size_t>(rec.cluster)]));
    const int delta = bernoulli(rng, expit(s.censoring_intercept - x1 - 0.3 * x2));
    const double p2 = expit(s.cause_intercept + x1);
    const int cause = 1 + bernoulli(rng, p2);
    const double eps1 = sigma * z(rng);
    const double eps2 = sigma * z(rng);
    const double re = u[static_cast<std::size_t>(rec.cluster)];

    const double b1 = s.blip1[0] + s.blip1[1] * x1;
    const double b2 = s.blip2[0] + s.blip2[1] * x1;
    const double base = cause == 1 ? 1.0 + 0.5 * x1 - 0.3 * x2 + re + eps1 : 2.0 - 0.1 * x1 + 0.2 * x2 + re + eps2;
    const double blip = cause == 1 ? b1 : b2;
    const double log_t = base + rec.treatment * blip;

    rec.delta = kind == SimKind::test ? 1 : delta;
    rec.observed_time = std::exp(log_t);
    if (rec.delta == 1) rec.cause = cause;
    records.push_back(std::move(rec));

    t.cause.push_back(cause);
    t.prob_cause2.push_back(p2);
    t.log_t0.push_back(base);
    t.log_t1.push_back(base + blip);
    t.blip1.push_back(b1);
    t.blip2.push_back(b2);
    t.oracle.push_back(decide(blip, 0.0));
  }
  return {Dataset({"x1", "x2"}, std::move(records), 2, "treatment"), std::move(t)};
}

void write_truth(const SimDataset& sim, std::ostream& out) {
  const auto& t = sim.truth;
  out << "subject_id,true_cause,prob_cause2,log_time_untreated,log_time_treated,blip_cause1,blip_cause2,"
         "oracle_decision\n";
  for (std::size_t i = 0; i < t.cause.size(); ++i) {
    out << sim.data[i].id << ',' << t.cause[i] << ',' << csv::format_double(t.prob_cause2[i]) << ','
        << csv::format_double(t.log_t0[i]) << ',' << csv::format_double(t.log_t1[i]) << ','
        << csv::format_double(t.blip1[i]) << ',' << csv::format_double(t.blip2[i]) << ',' << t.oracle[i]
        << '\n';
  }
}

RegimeSet true_regime_set(const SimSetting& s) {
  RegimeSet rs;
  rs.scope = RegimeScope::per_cause;
  LogisticFit cause_fit;
  cause_fit.coefficients = Vector(2);
  cause_fit.coefficients << s.cause_intercept, 1.0;
  cause_fit.converged = true;
  rs.cause_model = CauseModel(2, {"x1"}, {}, {cause_fit});
  BlipModel b1;
  b1.cause = 1;
  b1.treatment_free_cols = {"x1", "x2"};
  b1.blip_cols = {"x1"};
  b1.beta = Vector(3);
  b1.beta << 1.0, 0.5, -0.3;
  b1.psi = Vector(2);
  b1.psi << s.blip1[0], s.blip1[1];
  BlipModel b2 = b1;
  b2.cause = 2;
  b2.beta << 2.0, -0.1, 0.2;
  b2.psi << s.blip2[0], s.blip2[1];
  rs.blips = {b1, b2};
  return rs;
}

ModelSpec scenario_spec(std::string_view scenario) {
  const std::vector<std::string> one{"x1"}, both{"x1", "x2"};
  bool outcome_correct = false, weights_correct = false;
  if (scenario == "i") {
  } else if (scenario == "ii") {
    outcome_correct = true;
  } else if (scenario == "iii") {
    weights_correct = true;
  } else if (scenario == "iv") {
    outcome_correct = weights_correct = true;
  } else {
    throw std::invalid_argument("unknown scenario '" + std::string(scenario) + "' (i|ii|iii|iv)");
  }
  ModelSpec spec;
  spec.treatment_cols = weights_correct ? both : one;
  spec.censoring_cols = weights_correct ? both : one;
  spec.cause_cols = one;
  spec.treatment_free_cols = outcome_correct ? both : one;
  spec.blip_cols = one;
  return spec;
}

std::vector<RegimeMetrics> evaluate_on_test(const std::vector<RuleKind>& regimes, const Dataset& train,
                                            const RegimeSet& fitted, const ModelSpec& spec,
                                            const EstimationOptions& options, const SimDataset& test,
                                            const RegimeSet& truth, std::uint64_t uniform_seed) {
  const Dataset& d = test.data;
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(d.n()));
  std::vector<RegimeMetrics> out;
  out.reserve(regimes.size());
  for (const auto kind : regimes) {
    std::vector<int> rule;
    switch (kind) {
      case RuleKind::oracle: rule = test.truth.oracle; break;
      case RuleKind::weighted:
      case RuleKind::greedy: rule = rule_decisions(kind, fitted, d); break;
      case RuleKind::uniform: rule = UniformRegime(uniform_seed).decisions(d.n()); break;
      case RuleKind::cause_specific:
        rule = rule_decisions(kind, cause_specific_regime(train, 1, spec, options), d);
        break;
      case RuleKind::composite: rule = rule_decisions(kind, composite_regime(train, spec, options), d); break;
      case RuleKind::treatment_dependent: rule = fit_treatment_dependent_rule(train, spec).decisions(d); break;
    }
    out.push_back(evaluate_rule(d, rule, truth, ones));
  }
  return out;
}

StudyResult run_replication_study(const StudyConfig& config) {
  if (config.reps < 1) throw std::invalid_argument("study needs at least one replicate");
  StudyResult result;
  result.config = config;
  const auto& s = config.setting;
  const ModelSpec spec = scenario_spec(config.scenario);
  EstimationOptions options = config.estimation;
  if (s.working_correlation) options.gee.correlation = *s.working_correlation;
  result.config.estimation = options;

  const RegimeSet truth = true_regime_set(s);
  const SimDataset test = simulate_dataset(s, SimKind::test, derive_seed(config.seed, kTestStream));
  const std::array<double, 4> true_psi{s.blip1[0], s.blip1[1], s.blip2[0], s.blip2[1]};
  result.parameter_names = {"cause1:(intercept)", "cause1:x1", "cause2:(intercept)", "cause2:x1"};

  const auto R = static_cast<std::size_t>(config.reps);
  const auto nr = static_cast<Eigen::Index>(config.regimes.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  result.estimates = Matrix::Constant(config.reps, 4, nan);
  result.pot = Matrix::Constant(config.reps, nr, nan);
  result.value = Matrix::Constant(config.reps, nr, nan);
  std::vector<char> failed(R, 0);
  result.failure_messages.assign(R, "");

  parallel_for(R, config.threads, [&](std::size_t b) {
    const std::uint64_t rep_seed = derive_seed(config.seed, b);
    try {
      const SimDataset train = simulate_dataset(s, SimKind::train, rep_seed);
      const RegimeSet fitted = estimate_blips(train.data, spec, options);
      const auto row = static_cast<Eigen::Index>(b);
      for (int k = 0; k < 2; ++k) {
        result.estimates(row, 2 * k) = fitted.blips[static_cast<std::size_t>(k)].psi[0];
        result.estimates(row, 2 * k + 1) = fitted.blips[static_cast<std::size_t>(k)].psi[1];
      }
      const auto metrics = evaluate_on_test(config.regimes, train.data, fitted, spec, options, test, truth, rep_seed);
      for (Eigen::Index j = 0; j < nr; ++j) {
        result.pot(row, j) = metrics[static_cast<std::size_t>(j)].pot;
        result.value(row, j) = metrics[static_cast<std::size_t>(j)].value;
      }
    } catch (const Error& e) {
      failed[b] = 1;
      result.failure_messages[b] = e.what();
      result.estimates.row(static_cast<Eigen::Index>(b)).setConstant(nan);
      result.pot.row(static_cast<Eigen::Index>(b)).setConstant(nan);
      result.value.row(static_cast<Eigen::Index>(b)).setConstant(nan);
    }
  });

  result.failed.assign(failed.begin(), failed.end());
  result.failures = static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  const int ok = config.reps - result.failures;
  if (ok < 1) throw Error("every replicate failed: " + result.failure_messages.front());

  const double root_n = std::sqrt(static_cast<double>(s.n_train));
  auto column_stats = [&](const Matrix& m, Eigen::Index j) {
    double sum = 0.0, sq = 0.0;
    for (Eigen::Index b = 0; b < m.rows(); ++b) {
      if (failed[static_cast<std::size_t>(b)]) continue;
      sum += m(b, j);
    }
    const double mean = sum / ok;
    for (Eigen::Index b = 0; b < m.rows(); ++b) {
      if (failed[static_cast<std::size_t>(b)]) continue;
      sq += (m(b, j) - mean) * (m(b, j) - mean);
    }
    const double sd = ok > 1 ? std::sqrt(sq / (ok - 1)) : 0.0;
    return std::pair{mean, sd};
  };
  for (Eigen::Index j = 0; j < 4; ++j) {
    const auto [mean, sd] = column_stats(result.estimates, j);
    const double truth_j = true_psi[static_cast<std::size_t>(j)];
    result.parameters.push_back({result.parameter_names[static_cast<std::size_t>(j)], truth_j, mean,
                                 root_n * (mean - truth_j), root_n * sd});
  }
  for (Eigen::Index j = 0; j < nr; ++j) {
    result.regimes.push_back({config.regimes[static_cast<std::size_t>(j)], column_stats(result.pot, j).first,
                              column_stats(result.value, j).first});
  }
  return result;
}

void write_parameter_summary(const StudyResult& r, std::ostream& out, bool header) {
  if (header) out << "setting,scenario,param,sqrt_n_bias,sqrt_n_se\n";
  for (const auto& p : r.parameters) {
    out << r.config.setting.name << ',' << r.config.scenario << ',' << p.name << ','
        << csv::format_double(p.sqrt_n_bias) << ',' << csv::format_double(p.sqrt_n_se) << '\n';
  }
}

void write_regime_summary(const StudyResult& r, std::ostream& out, bool header) {
  if (header) out << "setting,scenario,regime,pot,value\n";
  for (const auto& g : r.regimes) {
    out << r.config.setting.name << ',' << r.config.scenario << ',' << to_string(g.regime) << ','
        << csv::format_double(g.pot) << ',' << csv::format_double(g.value) << '\n';
  }
}

void write_replicates(const StudyResult& r, std::ostream& out) {
  out << "replicate,failed";
  for (const auto& name : r.parameter_names) out << ',' << csv::escape(name);
  for (const auto k : r.config.regimes) out << ",pot_" << to_string(k) << ",value_" << to_string(k);
  out << '\n';
  for (Eigen::Index b = 0; b < r.estimates.rows(); ++b) {
    const bool f = r.failed[static_cast<std::size_t>(b)];
    out << b << ',' << (f ? 1 : 0);
    auto cell = [&](double v) { out << ',' << (f ? std::string() : csv::format_double(v)); };
    for (Eigen::Index j = 0; j < r.estimates.cols(); ++j) cell(r.estimates(b, j));
    for (Eigen::Index j = 0; j < r.pot.cols(); ++j) {
      cell(r.pot(b, j));
      cell(r.value(b, j));
    }
    out << '\n';
  }
}

}  // namespace critr
