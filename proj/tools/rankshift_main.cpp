// Command-line front end: analyze a CSV experiment, run simulation cells,
// query the robustness and efficiency calculators, or run randomization
// tests. Reports go to --out or stdout; timing and warnings go to stderr so
// report files depend only on the command and the seed.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "rankshift/cli_io.hpp"
#include "rankshift/common.hpp"
#include "rankshift/design.hpp"
#include "rankshift/randtest.hpp"
#include "rankshift/simulation.hpp"
#include "rankshift/theory.hpp"

namespace {

using namespace rankshift;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::fwrite(content.data(), 1, content.size(), stdout);
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + out_path + "'");
  out << content;
  if (!out) throw DataError("short write to '" + out_path + "'");
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<Method> methods;
  methods.reserve(names.size());
  for (const std::string& name : names) methods.push_back(method_from_name(name));
  return methods;
}

ReportFormat format_from(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw InvalidInput("unknown format '" + name + "' (use csv or json)");
}

TiePolicy tie_policy_from(const std::string& name, std::uint64_t seed) {
  if (name == "up") return TiePolicy::up();
  if (name == "average") return TiePolicy::average();
  if (name == "random") return TiePolicy::random(seed);
  throw InvalidInput("unknown tie policy '" + name + "' (use up, average, or random)");
}

StatKind stat_from(const std::string& name) {
  if (name == "rank" || name == "rank_sum") return StatKind::rank_sum;
  if (name == "rank_adj" || name == "adjusted_rank_sum") return StatKind::adjusted_rank_sum;
  if (name == "dm" || name == "diff_means") return StatKind::diff_means;
  throw InvalidInput("unknown statistic '" + name + "' (use rank, rank_adj, or dm)");
}

const char* stat_name(StatKind stat) {
  switch (stat) {
    case StatKind::rank_sum:
      return "rank_sum";
    case StatKind::adjusted_rank_sum:
      return "adjusted_rank_sum";
    case StatKind::diff_means:
      return "diff_means";
  }
  return "unknown";
}

DensitySpec family_from(const std::string& name, double pareto_alpha) {
  if (name == "normal") return DensitySpec::normal();
  if (name == "uniform") return DensitySpec::uniform();
  if (name == "laplace") return DensitySpec::laplace();
  if (name == "exponential") return DensitySpec::exponential();
  if (name == "pareto") return DensitySpec::pareto(pareto_alpha);
  if (name.size() > 1 && name[0] == 't') {
    try {
      std::size_t used = 0;
      const double df = std::stod(name.substr(1), &used);
      if (used == name.size() - 1) return DensitySpec::student_t(df);
    } catch (const std::exception&) {
    }
  }
  throw InvalidInput("unknown family '" + name +
                     "' (use normal, uniform, laplace, t<df>, exponential, or pareto)");
}

std::vector<double> read_pilot_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (char& c : text) {
    if (c == ',' || c == '\r' || c == '\t') c = ' ';
  }
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\n')) ++pos;
    if (pos >= text.size()) break;
    std::size_t end = pos;
    while (end < text.size() && text[end] != ' ' && text[end] != '\n') ++end;
    const std::string token = text.substr(pos, end - pos);
    try {
      std::size_t used = 0;
      values.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw DataError("cannot parse pilot value '" + token + "' in '" + path + "'");
    }
    pos = end;
  }
  return values;
}

int run(int argc, char** argv) {
  CLI::App app{"Rank-based estimation of a constant additive treatment effect"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  double level = 0.95;
  double nu = 1.0 / 3.0;
  std::string tie = "up";
  int threads = 1;
  std::string format = "csv";
  app.add_option("--seed", seed, "Seed for Monte Carlo components")->capture_default_str();
  app.add_option("--level", level, "Confidence level")->capture_default_str();
  app.add_option("--nu", nu, "Window exponent of the density functional, in (0, 1/2)")
      ->capture_default_str();
  app.add_option("--tie-policy", tie, "Rank tie policy: up, average, or random")
      ->capture_default_str();
  app.add_option("--threads", threads, "Worker threads for simulation cells")
      ->envname("RANKSHIFT_THREADS")
      ->capture_default_str();
  app.add_option("--format", format, "Report format: csv or json")->capture_default_str();

  // analyze
  auto* analyze_cmd = app.add_subcommand("analyze", "Estimate the effect from a CSV file");
  analyze_cmd->fallthrough();
  std::string data_path, out_path;
  std::string outcome = "y", treatment = "z";
  std::vector<std::string> covariates;
  bool no_header = false;
  std::vector<std::string> method_names{"diff_in_means", "rank_unadjusted", "rank_adjusted",
                                        "ols_adjusted", "lin_interaction"};
  analyze_cmd->add_option("--data", data_path, "CSV file with the experiment")->required();
  analyze_cmd->add_option("--outcome", outcome, "Outcome column")->capture_default_str();
  analyze_cmd->add_option("--treatment", treatment, "0/1 treatment column")
      ->capture_default_str();
  analyze_cmd->add_option("--covariates", covariates, "Covariate columns")->delimiter(',');
  analyze_cmd->add_flag("--no-header", no_header,
                        "File has no header; name columns by 0-based index");
  analyze_cmd->add_option("--methods", method_names, "Estimators to run")->delimiter(',');
  analyze_cmd->add_option("--out", out_path, "Write the report here instead of stdout");

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "Run one Monte Carlo cell");
  simulate_cmd->fallthrough();
  int setting_id = 1;
  std::string error_kind = "normal";
  double prop = 0.5, tau0 = 2.0;
  std::size_t n_units = 1000;
  std::uint64_t reps = 1000;
  bool oracle = false;
  std::vector<std::string> sim_method_names{"diff_in_means", "rank_unadjusted",
                                            "rank_adjusted", "ols_adjusted",
                                            "lin_interaction"};
  std::string sim_out;
  simulate_cmd->add_option("--setting", setting_id, "Data generating setting: 1, 2, or 3")
      ->capture_default_str();
  simulate_cmd->add_option("--error", error_kind, "Error law: normal, t1, or t3")
      ->capture_default_str();
  simulate_cmd->add_option("--prop", prop, "Treated proportion")->capture_default_str();
  simulate_cmd->add_option("--n", n_units, "Units per replication")->capture_default_str();
  simulate_cmd->add_option("--reps", reps, "Replications")->capture_default_str();
  simulate_cmd->add_option("--tau0", tau0, "True effect")->capture_default_str();
  simulate_cmd->add_flag("--oracle", oracle,
                         "Plug the true density functional into the rank intervals");
  simulate_cmd->add_option("--methods", sim_method_names, "Estimators to run")
      ->delimiter(',');
  simulate_cmd->add_option("--out", sim_out, "Write the report here instead of stdout");

  // theory
  auto* theory_cmd = app.add_subcommand("theory", "Robustness and efficiency calculators");
  theory_cmd->fallthrough();
  double breakdown_lambda = 0.0;
  std::string are_family;
  std::string pilot_path;
  double pareto_alpha = 3.0;
  bool numeric = false;
  auto* breakdown_opt = theory_cmd->add_option(
      "--breakdown", breakdown_lambda, "Asymptotic breakdown point at this treated fraction");
  auto* are_opt = theory_cmd->add_option(
      "--are", are_family, "Efficiency versus the difference in means for a family");
  auto* pilot_opt = theory_cmd->add_option(
      "--pilot-eff", pilot_path, "Efficiency estimated from a file of pilot observations");
  theory_cmd->add_option("--alpha", pareto_alpha, "Shape for the pareto family")
      ->capture_default_str();
  theory_cmd->add_flag("--numeric", numeric,
                       "Integrate the definition instead of using the tabulated value");

  // randtest
  auto* rand_cmd = app.add_subcommand("randtest", "Randomization test or inversion interval");
  rand_cmd->fallthrough();
  std::string rand_data, rand_out;
  std::string rand_outcome = "y", rand_treatment = "z";
  std::vector<std::string> rand_covariates;
  bool rand_no_header = false;
  double rand_tau0 = 0.0;
  std::string stat = "rank";
  std::uint64_t draws = 0;
  bool invert = false;
  double grid_lo = 0.0, grid_hi = 0.0;
  int grid_points = 513;
  rand_cmd->add_option("--data", rand_data, "CSV file with the experiment")->required();
  rand_cmd->add_option("--outcome", rand_outcome, "Outcome column")->capture_default_str();
  rand_cmd->add_option("--treatment", rand_treatment, "0/1 treatment column")
      ->capture_default_str();
  rand_cmd->add_option("--covariates", rand_covariates, "Covariate columns")->delimiter(',');
  rand_cmd->add_flag("--no-header", rand_no_header,
                     "File has no header; name columns by 0-based index");
  rand_cmd->add_option("--tau0", rand_tau0, "Shift under test")->capture_default_str();
  rand_cmd->add_option("--stat", stat, "Statistic: rank, rank_adj, or dm")
      ->capture_default_str();
  rand_cmd->add_option("--draws", draws,
                       "Monte Carlo assignments (0 enumerates them all)")
      ->capture_default_str();
  rand_cmd->add_flag("--invert", invert, "Report the test-inversion interval instead");
  auto* grid_lo_opt = rand_cmd->add_option("--grid-lo", grid_lo, "Inversion grid lower end");
  auto* grid_hi_opt = rand_cmd->add_option("--grid-hi", grid_hi, "Inversion grid upper end");
  rand_cmd->add_option("--grid-points", grid_points, "Inversion grid size")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const ReportFormat fmt = format_from(format);
  if (threads < 1) throw InvalidInput("--threads must be at least 1");

  if (app.got_subcommand(analyze_cmd)) {
    DatasetSchema schema;
    schema.outcome_col = outcome;
    schema.treatment_col = treatment;
    schema.covariate_cols = covariates;
    schema.has_header = !no_header;
    const Experiment exp = load_experiment_csv(data_path, schema);

    AnalysisConfig config;
    config.methods = parse_methods(method_names);
    config.level = level;
    config.nu = NuConfig(nu);
    config.tie_policy = tie_policy_from(tie, seed);
    config.seed = seed;
    config.format = fmt;

    const AnalysisReport report = analyze(exp, config);
    for (const std::string& warning : report.warnings) {
      std::fprintf(stderr, "warning: %s\n", warning.c_str());
    }
    emit(out_path, fmt == ReportFormat::csv ? render_analysis_csv(report)
                                            : render_analysis_json(report));
    int failures = 0;
    for (const AnalysisRow& row : report.rows) {
      if (!row.error.empty()) {
        std::fprintf(stderr, "%s failed: %s\n", row.name.c_str(), row.error.c_str());
        ++failures;
      }
    }
    return failures == 0 ? 0 : 3;
  }

  if (app.got_subcommand(simulate_cmd)) {
    SimulationSetting setting;
    setting.id = setting_id;
    setting.n = n_units;
    setting.prop_treated = prop;
    setting.tau0 = tau0;
    setting.error = error_kind_from_name(error_kind);
    setting.reps = reps;
    setting.base_seed = seed;
    setting.nu = NuConfig(nu);
    setting.level = level;
    const std::vector<Method> methods = parse_methods(sim_method_names);

    const auto start = std::chrono::steady_clock::now();
    const SimulationReport report = oracle ? run_oracle_cell(setting, methods, threads)
                                           : run_cell(setting, methods, threads);
    const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
    std::fprintf(stderr, "wall_time_s %.3f\n", wall.count());

    const std::string hash = config_hash_of(setting, methods, oracle);
    emit(sim_out, fmt == ReportFormat::csv ? render_simulation_csv(report)
                                           : render_simulation_json(report, hash));
    return 0;
  }

  if (app.got_subcommand(theory_cmd)) {
    const int asked = (breakdown_opt->count() ? 1 : 0) + (are_opt->count() ? 1 : 0) +
                      (pilot_opt->count() ? 1 : 0);
    if (asked != 1) {
      throw InvalidInput("theory needs exactly one of --breakdown, --are, --pilot-eff");
    }
    double value = 0.0;
    if (breakdown_opt->count()) {
      value = breakdown_point_asymptotic(breakdown_lambda);
    } else if (are_opt->count()) {
      const DensitySpec spec = family_from(are_family, pareto_alpha);
      value = numeric ? are_numeric(spec) : are_closed_form(spec);
    } else {
      value = pilot_efficiency_estimate(read_pilot_file(pilot_path), NuConfig(nu));
    }
    std::printf("%.6f\n", value);
    return 0;
  }

  // randtest
  DatasetSchema schema;
  schema.outcome_col = rand_outcome;
  schema.treatment_col = rand_treatment;
  schema.covariate_cols = rand_covariates;
  schema.has_header = !rand_no_header;
  const Experiment exp = load_experiment_csv(rand_data, schema);
  const StatKind kind = stat_from(stat);
  const TiePolicy policy = tie_policy_from(tie, seed);
  const AssignmentSpace space =
      draws == 0 ? AssignmentSpace::exact(exp.size(), exp.treated_count())
                 : AssignmentSpace::monte_carlo(exp.size(), exp.treated_count(), draws, seed);

  if (invert) {
    std::optional<TauGrid> grid;
    if (grid_lo_opt->count() || grid_hi_opt->count()) {
      if (!grid_lo_opt->count() || !grid_hi_opt->count()) {
        throw InvalidInput("--grid-lo and --grid-hi go together");
      }
      grid = TauGrid{grid_lo, grid_hi, grid_points};
    }
    const ConfidenceInterval ci = test_inversion_ci(exp, kind, space, level, grid, policy);
    if (fmt == ReportFormat::csv) {
      std::string out = "statistic,level,ci_lo,ci_hi,length\n";
      out += std::string(stat_name(kind)) + ',' + g17(level) + ',' + g17(ci.lo) + ',' +
             g17(ci.hi) + ',' + g17(ci.hi - ci.lo) + '\n';
      emit(rand_out, out);
    } else {
      nlohmann::json doc;
      doc["kind"] = "inversion";
      doc["statistic"] = stat_name(kind);
      doc["level"] = level;
      doc["ci_lo"] = ci.lo;
      doc["ci_hi"] = ci.hi;
      doc["length"] = ci.hi - ci.lo;
      emit(rand_out, doc.dump(2) + "\n");
    }
    return 0;
  }

  const NullDistribution dist = null_distribution(exp, rand_tau0, kind, space, policy);
  const double observed = observed_statistic(exp, rand_tau0, kind, policy);
  const double p_left = p_value(dist, observed, Sided::left);
  const double p_right = p_value(dist, observed, Sided::right);
  const double p_two = p_value(dist, observed, Sided::two_sided);
  if (fmt == ReportFormat::csv) {
    std::string out = "statistic,tau0,observed,p_left,p_right,p_two_sided\n";
    out += std::string(stat_name(kind)) + ',' + g17(rand_tau0) + ',' + g17(observed) + ',' +
           g17(p_left) + ',' + g17(p_right) + ',' + g17(p_two) + '\n';
    emit(rand_out, out);
  } else {
    nlohmann::json doc;
    doc["kind"] = "randtest";
    doc["statistic"] = stat_name(kind);
    doc["tau0"] = rand_tau0;
    doc["observed"] = observed;
    doc["p_left"] = p_left;
    doc["p_right"] = p_right;
    doc["p_two_sided"] = p_two;
    doc["assignments"] = dist.values.size();
    emit(rand_out, doc.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 4;
  }
}
