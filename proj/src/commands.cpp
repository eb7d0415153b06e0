#include "critr/commands.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "critr/csv.hpp"
#include "critr/error.hpp"
#include "critr/parallel.hpp"
#include "critr/serialize.hpp"
#include "critr/sim.hpp"

namespace critr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool has_bands(RuleKind k) { return k == RuleKind::weighted || k == RuleKind::greedy || k == RuleKind::oracle; }

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

Vector benefits_for(RuleKind kind, const RegimeSet& rs, const Dataset& d) {
  if (kind != RuleKind::oracle) return rule_benefits(kind, rs, d);
  // The oracle needs the cause, which censored rows do not have.
  const Matrix oracle = oracle_benefit_matrix(rs, d);
  Vector out(oracle.rows());
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& c = d[i].cause;
    out[static_cast<Eigen::Index>(i)] = c ? oracle(static_cast<Eigen::Index>(i), *c - 1) : kNaN;
  }
  return out;
}

std::vector<int> decisions_from(const Vector& benefits, const CostThreshold& cost, const Dataset& d) {
  const Vector zeta = cost.values(d);
  std::vector<int> out(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    out[i] = std::isnan(benefits[j]) ? 0 : decide(benefits[j], zeta[j]);
  }
  return out;
}

Vector band_values(const Dataset& d, const Vector& benefits) {
  std::vector<double> kept;
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (d[i].delta == 1) kept.push_back(benefits[static_cast<Eigen::Index>(i)]);
  }
  return Eigen::Map<const Vector>(kept.data(), static_cast<Eigen::Index>(kept.size()));
}

}  // namespace

std::vector<std::string> blip_parameter_names(const RegimeSet& rs) {
  std::vector<std::string> names;
  for (const auto& b : rs.blips) {
    const std::string prefix = b.cause == 0 ? std::string("composite") : "cause" + std::to_string(b.cause);
    for (const auto& col : design_names(b.blip_cols, true)) names.push_back(prefix + ":" + col);
  }
  return names;
}

Vector stacked_blips(const RegimeSet& rs) {
  Eigen::Index p = 0;
  for (const auto& b : rs.blips) p += b.psi.size();
  Vector out(p);
  Eigen::Index at = 0;
  for (const auto& b : rs.blips) {
    out.segment(at, b.psi.size()) = b.psi;
    at += b.psi.size();
  }
  return out;
}

std::vector<RegimeEvaluation> evaluate_regimes(const Dataset& d, const ModelSpec& spec, const RegimeSet& rs,
                                               const FitOptions& options, const Vector& p_event) {
  const Vector w = ipc_weights(d, p_event);
  std::vector<RegimeEvaluation> out;
  for (const auto kind : options.regimes) {
    RegimeEvaluation ev;
    ev.kind = kind;
    switch (kind) {
      case RuleKind::oracle:
      case RuleKind::weighted:
      case RuleKind::greedy: ev.benefits = benefits_for(kind, rs, d); break;
      case RuleKind::cause_specific:
        ev.benefits = rule_benefits(kind, cause_specific_regime(d, options.target_cause, spec, options.estimation), d);
        break;
      case RuleKind::composite: ev.benefits = rule_benefits(kind, composite_regime(d, spec, options.estimation), d); break;
      case RuleKind::treatment_dependent: ev.benefits = fit_treatment_dependent_rule(d, spec).benefits(d); break;
      case RuleKind::uniform: ev.decisions = UniformRegime(options.seed).decisions(d.n()); break;
    }
    if (ev.benefits) ev.decisions = decisions_from(*ev.benefits, rs.cost, d);
    ev.metrics = evaluate_rule(d, ev.decisions, rs, w);
    out.push_back(std::move(ev));
  }
  return out;
}

FitResult run_fit(const Dataset& d, const ModelSpec& spec, const FitOptions& options) {
  spec.validate(d);
  FitResult result;
  const auto nuisance = fit_nuisance(d, spec);
  result.regime = estimate_blips(d, spec, nuisance, options.estimation);
  result.blip_names = blip_parameter_names(result.regime);
  result.blip_estimates = stacked_blips(result.regime);
  result.evaluations = evaluate_regimes(d, spec, result.regime, options, nuisance.p_event);
  if (options.bootstrap <= 0) return result;

  result.statistic_names = result.blip_names;
  for (const auto k : options.regimes) {
    result.statistic_names.push_back(std::string("pot:") + to_string(k));
    result.statistic_names.push_back(std::string("value:") + to_string(k));
  }
  if (options.bands) {
    for (const auto k : options.regimes) {
      if (!has_bands(k)) continue;
      for (std::size_t i = 0; i < d.n(); ++i) {
        if (d[i].delta == 1) {
          result.statistic_names.push_back(std::string("benefit:") + to_string(k) + ":" + std::to_string(d[i].id));
        }
      }
    }
  }

  const Statistic statistic = [&](const Dataset& sample) -> Vector {
    const auto nz = fit_nuisance(sample, spec);
    const RegimeSet rs = estimate_blips(sample, spec, nz, options.estimation);
    const auto evals = evaluate_regimes(sample, spec, rs, options, nz.p_event);
    std::vector<double> v;
    const Vector psi = stacked_blips(rs);
    v.assign(psi.data(), psi.data() + psi.size());
    for (const auto& e : evals) {
      v.push_back(e.metrics.pot);
      v.push_back(e.metrics.value);
    }
    if (options.bands) {
      for (const auto k : options.regimes) {
        if (!has_bands(k)) continue;
        const Vector b = band_values(d, benefits_for(k, rs, d));
        v.insert(v.end(), b.data(), b.data() + b.size());
      }
    }
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  };
  BootstrapOptions bo;
  bo.replicates = options.bootstrap;
  bo.seed = options.seed;
  bo.level = options.level;
  bo.threads = options.threads;
  result.bootstrap = cluster_bootstrap(d, statistic, bo);
  return result;
}

void write_fit_outputs(const FitResult& fit, const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& boot = fit.bootstrap;
  {
    auto out = open_output(dir / "blips.csv");
    out << "parameter,estimate" << (boot ? ",lo,hi" : "") << '\n';
    for (std::size_t j = 0; j < fit.blip_names.size(); ++j) {
      const auto k = static_cast<Eigen::Index>(j);
      out << csv::escape(fit.blip_names[j]) << ',' << csv::format_double(fit.blip_estimates[k]);
      if (boot) out << ',' << csv::format_double(boot->lo[k]) << ',' << csv::format_double(boot->hi[k]);
      out << '\n';
    }
  }
  const auto np = static_cast<Eigen::Index>(fit.blip_names.size());
  {
    auto out = open_output(dir / "metrics.csv");
    out << "regime,pot,value,effective_n" << (boot ? ",pot_lo,pot_hi,value_lo,value_hi" : "") << '\n';
    for (std::size_t r = 0; r < fit.evaluations.size(); ++r) {
      const auto& e = fit.evaluations[r];
      out << to_string(e.kind) << ',' << csv::format_double(e.metrics.pot) << ','
          << csv::format_double(e.metrics.value) << ',' << csv::format_double(e.metrics.effective_n);
      if (boot) {
        const auto j = np + 2 * static_cast<Eigen::Index>(r);
        out << ',' << csv::format_double(boot->lo[j]) << ',' << csv::format_double(boot->hi[j]) << ','
            << csv::format_double(boot->lo[j + 1]) << ',' << csv::format_double(boot->hi[j + 1]);
      }
      out << '\n';
    }
  }
  Eigen::Index band_at = np + 2 * static_cast<Eigen::Index>(fit.evaluations.size());
  const bool bands = boot && static_cast<Eigen::Index>(fit.statistic_names.size()) > band_at;
  for (const auto& e : fit.evaluations) {
    if (!e.benefits) continue;
    std::vector<std::pair<double, double>> ci;
    if (bands && has_bands(e.kind)) {
      ci.assign(d.n(), {kNaN, kNaN});
      for (std::size_t i = 0; i < d.n(); ++i) {
        if (d[i].delta != 1) continue;
        ci[i] = {boot->lo[band_at], boot->hi[band_at]};
        ++band_at;
      }
    }
    auto out = open_output(dir / ("benefit_" + std::string(to_string(e.kind)) + ".csv"));
    write_benefit_curve(benefit_curve(d, *e.benefits, e.decisions, ci.empty() ? nullptr : &ci), out);
  }
  save_regime(fit.regime, dir / "regime.json");
  if (boot) {
    // Band rows live in the benefit files; the table keeps blips and metrics.
    std::size_t keep = 0;
    while (keep < fit.statistic_names.size() && fit.statistic_names[keep].rfind("benefit:", 0) != 0) ++keep;
    BootstrapResult table = *boot;
    const auto k = static_cast<Eigen::Index>(keep);
    table.estimate = boot->estimate.head(k);
    table.samples = boot->samples.leftCols(k);
    table.lo = boot->lo.head(k);
    table.hi = boot->hi.head(k);
    auto out = open_output(dir / "ci.csv");
    write_ci_table(out, {fit.statistic_names.begin(), fit.statistic_names.begin() + k}, table);
  }
}

namespace {

struct CommonFlags {
  std::uint64_t seed = 0;
  unsigned threads = default_thread_count();
  std::string weights = "overlap";
  std::string corr = "exchangeable";
  bool one_step = false;
  std::string regimes;
  std::string out = ".";
};

EstimationOptions estimation_from(const CommonFlags& f) {
  EstimationOptions e;
  e.weights = parse_weight_kind(f.weights);
  e.gee.correlation = parse_correlation_kind(f.corr);
  e.gee.one_step = f.one_step;
  return e;
}

void add_estimation_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--weights", f.weights, "Balancing weights")->check(CLI::IsMember({"overlap", "ipw"}));
  cmd->add_option("--corr", f.corr, "Working correlation")->check(CLI::IsMember({"exchangeable", "independence"}));
  cmd->add_flag("--one-step", f.one_step, "Single moment update after an independence fit");
}

int cmd_simulate(const std::string& setting_name, const std::string& kind, std::optional<int> n, const CommonFlags& f) {
  const auto setting = sim_setting(setting_name);
  const SimKind k = kind == "test" ? SimKind::test : SimKind::train;
  const int rows = n.value_or(k == SimKind::train ? setting.n_train : setting.n_test);
  const auto sim = simulate_dataset(setting, k, f.seed, rows);
  const std::filesystem::path dir(f.out);
  std::filesystem::create_directories(dir);
  save_dataset(sim.data, dir / "data.csv");
  auto truth = open_output(dir / "truth.csv");
  write_truth(sim, truth);
  std::cout << "wrote " << sim.data.n() << " rows (" << sim.data.event_count() << " events) to " << dir.string()
            << '\n';
  return 0;
}

int cmd_study(const std::string& setting_name, const std::string& scenarios, int reps, const CommonFlags& f,
              bool corr_given) {
  StudyConfig config;
  config.setting = sim_setting(setting_name);
  config.reps = reps;
  config.seed = f.seed;
  config.threads = f.threads;
  config.estimation = estimation_from(f);
  if (!f.regimes.empty()) config.regimes = parse_rule_list(f.regimes);
  if (corr_given) config.setting.working_correlation = config.estimation.gee.correlation;

  std::vector<std::string> list;
  if (scenarios == "all") {
    list = {"i", "ii", "iii", "iv"};
  } else {
    std::stringstream ss(scenarios);
    std::string s;
    while (std::getline(ss, s, ',')) list.emplace_back(csv::trim(s));
  }
  const std::filesystem::path dir(f.out);
  std::filesystem::create_directories(dir);
  auto params = open_output(dir / "summary_params.csv");
  auto regimes = open_output(dir / "summary_regimes.csv");
  bool first = true;
  for (const auto& scn : list) {
    config.scenario = scn;
    const auto result = run_replication_study(config);
    write_parameter_summary(result, params, first);
    write_regime_summary(result, regimes, first);
    first = false;
    auto dump = open_output(dir / ("replicates_" + config.setting.name + "_" + scn + ".csv"));
    write_replicates(result, dump);
    if (result.failures > 0) {
      std::cerr << "scenario " << scn << ": " << result.failures << " of " << reps << " replicates failed\n";
    }
  }
  std::cout << "wrote study summaries to " << dir.string() << '\n';
  return 0;
}

FitOptions fit_options_from(const CommonFlags& f, int bootstrap, bool bands, int target) {
  FitOptions o;
  o.estimation = estimation_from(f);
  if (!f.regimes.empty()) o.regimes = parse_rule_list(f.regimes);
  o.bootstrap = bootstrap;
  o.bands = bands;
  o.seed = f.seed;
  o.threads = f.threads;
  o.target_cause = target;
  return o;
}

int cmd_fit(const std::string& data, const std::string& model, const FitOptions& options, const std::string& out,
            bool ci_only) {
  const auto config = load_model_config(model);
  const auto d = load_dataset(data, config.schema);
  if (d.dropped_rows() > 0) std::cerr << "dropped " << d.dropped_rows() << " incomplete rows\n";
  const auto fit = run_fit(d, config.spec, options);
  const std::filesystem::path dir(out);
  if (ci_only) {
    std::filesystem::create_directories(dir);
    auto ci = open_output(dir / "ci.csv");
    write_ci_table(ci, fit.statistic_names, *fit.bootstrap);
  } else {
    write_fit_outputs(fit, d, dir);
  }
  for (const auto& b : fit.regime.blips) {
    if (b.fit && b.fit->warning) std::cerr << "warning: " << *b.fit->warning << '\n';
  }
  std::cout << "fitted " << fit.blip_names.size() << " blip coefficients on " << d.n() << " rows";
  if (fit.bootstrap) std::cout << " (" << fit.bootstrap->failures << " failed bootstrap replicates)";
  std::cout << '\n';
  return 0;
}

int cmd_evaluate(const std::string& data, const std::string& model, const std::string& regime_path,
                 const FitOptions& options, const std::string& out) {
  const auto config = load_model_config(model);
  const auto d = load_dataset(data, config.schema);
  const auto rs = load_regime(regime_path);
  if (rs.single_blip()) throw Error("evaluate needs a per-cause regime file (from fit)");
  const auto nuisance = fit_nuisance(d, config.spec);
  const auto evals = evaluate_regimes(d, config.spec, rs, options, nuisance.p_event);
  const std::filesystem::path dir(out);
  std::filesystem::create_directories(dir);
  auto metrics = open_output(dir / "metrics.csv");
  metrics << "regime,pot,value,effective_n\n";
  for (const auto& e : evals) {
    metrics << to_string(e.kind) << ',' << csv::format_double(e.metrics.pot) << ','
            << csv::format_double(e.metrics.value) << ',' << csv::format_double(e.metrics.effective_n) << '\n';
    if (!e.benefits) continue;
    auto curve = open_output(dir / ("benefit_" + std::string(to_string(e.kind)) + ".csv"));
    write_benefit_curve(benefit_curve(d, *e.benefits, e.decisions), curve);
  }
  std::cout << "evaluated " << evals.size() << " regimes on " << d.n() << " rows\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Individualized treatment regimes for clustered competing-risks survival data"};
  app.require_subcommand(1);
  CommonFlags f;
  std::string setting, scenario = "iv", kind = "train", data, model, regime;
  std::optional<int> rows;
  int reps = 1000, bootstrap = 0, target = 1;
  bool bands = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", f.seed, "Random seed")->required();
    cmd->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--out", f.out, "Output directory");
  };

  auto* sim = app.add_subcommand("simulate", "Generate a simulated dataset and its ground truth");
  add_common(sim);
  sim->add_option("--setting", setting, "Simulation setting")->required();
  sim->add_option("--kind", kind, "train (censored) or test (uncensored)")->check(CLI::IsMember({"train", "test"}));
  sim->add_option("--n", rows, "Number of rows (default: the setting's size)")->check(CLI::PositiveNumber);

  auto* study = app.add_subcommand("study", "Replication study with bias, SE and regime metrics");
  add_common(study);
  add_estimation_flags(study, f);
  study->add_option("--setting", setting, "Simulation setting")->required();
  study->add_option("--scenario", scenario, "i, ii, iii, iv, a comma list, or all");
  study->add_option("--reps", reps, "Replicates")->check(CLI::PositiveNumber);
  study->add_option("--regimes", f.regimes, "Comma list of regimes");

  auto* fit = app.add_subcommand("fit", "Estimate regimes on a CSV dataset");
  add_common(fit);
  add_estimation_flags(fit, f);
  fit->add_option("--data", data, "Input CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--model", model, "Model configuration file")->required()->check(CLI::ExistingFile);
  fit->add_option("--regimes", f.regimes, "Comma list of regimes");
  fit->add_option("--bootstrap", bootstrap, "Cluster bootstrap replicates (0 = none)")->check(CLI::NonNegativeNumber);
  fit->add_flag("--bands", bands, "Bootstrap bands for the benefit curves");
  fit->add_option("--target", target, "Target cause of the cause-specific regime")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("evaluate", "Evaluate a saved regime on a CSV dataset");
  add_common(eval);
  eval->add_option("--data", data, "Input CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--model", model, "Model configuration file")->required()->check(CLI::ExistingFile);
  eval->add_option("--regime", regime, "regime.json written by fit")->required()->check(CLI::ExistingFile);
  eval->add_option("--regimes", f.regimes, "Comma list of regimes");
  eval->add_option("--target", target, "Target cause of the cause-specific regime")->check(CLI::PositiveNumber);

  auto* boot = app.add_subcommand("bootstrap", "Cluster bootstrap CIs for blips and regime metrics");
  add_common(boot);
  add_estimation_flags(boot, f);
  boot->add_option("--data", data, "Input CSV")->required()->check(CLI::ExistingFile);
  boot->add_option("--model", model, "Model configuration file")->required()->check(CLI::ExistingFile);
  boot->add_option("--regimes", f.regimes, "Comma list of regimes");
  boot->add_option("--bootstrap", bootstrap, "Replicates")->check(CLI::PositiveNumber);
  boot->add_option("--target", target, "Target cause of the cause-specific regime")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sim) return cmd_simulate(setting, kind, rows, f);
    if (*study) return cmd_study(setting, scenario, reps, f, study->count("--corr") > 0);
    if (*fit) return cmd_fit(data, model, fit_options_from(f, bootstrap, bands, target), f.out, false);
    if (*eval) return cmd_evaluate(data, model, regime, fit_options_from(f, 0, false, target), f.out);
    if (*boot) {
      if (bootstrap <= 0) bootstrap = 1000;
      return cmd_fit(data, model, fit_options_from(f, bootstrap, false, target), f.out, true);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace critr
