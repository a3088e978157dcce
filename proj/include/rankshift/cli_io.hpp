// CSV ingestion of real experiments, the analysis report over the full
// estimator lineup, and deterministic report rendering for the command line.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rankshift/design.hpp"
#include "rankshift/ranks.hpp"
#include "rankshift/simulation.hpp"
#include "rankshift/variance.hpp"

namespace rankshift {

inline constexpr const char* kVersion = "1.0.0";

// Which file columns hold the experiment. Headerless files address columns
// by 0-based index strings ("0", "1", ...).
struct DatasetSchema {
  std::string outcome_col = "y";
  std::string treatment_col = "z";
  std::vector<std::string> covariate_cols;
  bool has_header = true;
};

// Records of a comma-separated file: double-quote quoting with doubled
// escapes, LF or CRLF endings, embedded separators and newlines inside
// quotes. Blank records are dropped; error messages elsewhere number the
// remaining records from 1, header included. Exposed for tests.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

// Reads the experiment from a CSV file. Cells are parsed whole after
// trimming spaces and tabs; the treatment column must be exactly 0 or 1 and
// the numeric columns finite. Any bad cell fails the load with its row
// number. The covariate matrix is absent when no covariate columns are named.
Experiment load_experiment_csv(const std::string& path, const DatasetSchema& schema);

// Writes the experiment with %.17g numeric fields, so a reload through the
// same schema is bit-equal.
void write_experiment_csv(const std::string& path, const Experiment& exp,
                          const DatasetSchema& schema);

enum class ReportFormat { csv, json };

struct AnalysisConfig {
  std::vector<Method> methods{Method::diff_means, Method::rank, Method::rank_adjusted,
                              Method::ols, Method::lin};
  double level = 0.95;
  NuConfig nu;
  TiePolicy tie_policy = TiePolicy::up();  // randomization tests only
  std::uint64_t seed = 0;                  // Monte Carlo components only
  ReportFormat format = ReportFormat::csv;
};

struct AnalysisRow {
  Method method = Method::diff_means;
  std::string name;
  std::optional<double> estimate;
  std::optional<double> std_error;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
  std::optional<double> length;
  std::string error;  // empty when the method succeeded
};

struct AnalysisReport {
  std::vector<AnalysisRow> rows;
  std::vector<std::string> warnings;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// One row per requested method, in request order. A method failure lands in
// its row's error field and the remaining methods still run; the numeric
// fields of a failed row stay empty. Warns when the outcome interquartile
// range exceeds 100 (the window-count variance step is scale sensitive).
AnalysisReport analyze(const Experiment& exp, const AnalysisConfig& config);

// Canonical method names as printed in reports, plus the short aliases
// dm, rank, rank_adj, ols, lin.
Method method_from_name(const std::string& name);

const char* error_kind_name(ErrorKind kind);
ErrorKind error_kind_from_name(const std::string& name);

// Renderings carry no timestamps or machine state, so identical reports give
// identical bytes. CSV numbers are %.17g; JSON keys are sorted.
std::string render_analysis_csv(const AnalysisReport& report);
std::string render_analysis_json(const AnalysisReport& report);
std::string render_simulation_csv(const SimulationReport& report);
std::string render_simulation_json(const SimulationReport& report,
                                   const std::string& config_hash);

// FNV-1a hash of a canonical text form of the result-affecting settings.
// Thread count and output format stay out, so reruns of the same statistical
// configuration match byte for byte.
std::string config_hash_of(const AnalysisConfig& config);
std::string config_hash_of(const SimulationSetting& setting,
                           const std::vector<Method>& methods, bool oracle);

}  // namespace rankshift
