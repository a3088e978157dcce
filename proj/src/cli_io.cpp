#include "rankshift/cli_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

#include "json.hpp"

#include "rankshift/common.hpp"
#include "rankshift/estimators.hpp"

namespace rankshift {

namespace {

using nlohmann::json;

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trimmed(const std::string& s) {
  std::size_t lo = 0, hi = s.size();
  while (lo < hi && (s[lo] == ' ' || s[lo] == '\t')) ++lo;
  while (hi > lo && (s[hi - 1] == ' ' || s[hi - 1] == '\t')) --hi;
  return s.substr(lo, hi - lo);
}

bool parse_double_cell(const std::string& cell, double& out) {
  const std::string t = trimmed(cell);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string quote_field(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Column positions resolved against the header (or against indexes for
// headerless files).
struct ResolvedColumns {
  std::size_t outcome = 0;
  std::size_t treatment = 0;
  std::vector<std::size_t> covariates;
  std::size_t width = 0;
  std::size_t first_data = 0;  // index into the record list
};

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  std::size_t found = header.size();
  std::size_t hits = 0;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (trimmed(header[j]) == name) {
      found = j;
      ++hits;
    }
  }
  if (hits == 0) throw DataError("column '" + name + "' not found in the header");
  if (hits > 1) throw DataError("column '" + name + "' appears more than once in the header");
  return found;
}

std::size_t index_column(const std::string& name, std::size_t width) {
  std::size_t idx = 0;
  const auto [ptr, ec] = std::from_chars(name.data(), name.data() + name.size(), idx);
  if (ec != std::errc() || ptr != name.data() + name.size() || idx >= width) {
    throw DataError("column '" + name +
                    "' not found (headerless files use 0-based index names up to " +
                    std::to_string(width - 1) + ")");
  }
  return idx;
}

ResolvedColumns resolve_columns(const std::vector<std::vector<std::string>>& records,
                                const DatasetSchema& schema) {
  ResolvedColumns cols;
  cols.width = records[0].size();
  if (schema.has_header) {
    const auto& header = records[0];
    cols.outcome = find_column(header, schema.outcome_col);
    cols.treatment = find_column(header, schema.treatment_col);
    for (const std::string& name : schema.covariate_cols) {
      cols.covariates.push_back(find_column(header, name));
    }
    cols.first_data = 1;
  } else {
    cols.outcome = index_column(schema.outcome_col, cols.width);
    cols.treatment = index_column(schema.treatment_col, cols.width);
    for (const std::string& name : schema.covariate_cols) {
      cols.covariates.push_back(index_column(name, cols.width));
    }
    cols.first_data = 0;
  }
  return cols;
}

const char* tie_policy_tag(const TiePolicy& policy, std::string& storage) {
  switch (policy.kind) {
    case TiePolicy::Kind::up:
      return "up";
    case TiePolicy::Kind::average:
      return "average";
    case TiePolicy::Kind::random:
      storage = "random:" + std::to_string(policy.seed);
      return storage.c_str();
  }
  return "unknown";
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string joined_method_names(const std::vector<Method>& methods) {
  std::string out;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    if (k) out += ',';
    out += method_name(methods[k]);
  }
  return out;
}

json optional_json(const std::optional<double>& v) {
  return v.has_value() ? json(*v) : json(nullptr);
}

}  // namespace

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;

  const auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) records.push_back(std::move(record));
    record.clear();
  };

  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field += '"';
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else {
        field += c;
        ++i;
      }
    } else if (c == '"' && field.empty()) {
      in_quotes = true;
      ++i;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      ++i;
    } else if (c == '\r') {
      end_record();
      i += (i + 1 < n && text[i + 1] == '\n') ? 2 : 1;
    } else if (c == '\n') {
      end_record();
      ++i;
    } else {
      field += c;
      ++i;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field at end of file");
  if (!field.empty() || !record.empty()) end_record();
  return records;
}

Experiment load_experiment_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());

  const std::vector<std::vector<std::string>> records = parse_csv(text);
  if (records.empty()) throw DataError("'" + path + "' holds no records");
  const ResolvedColumns cols = resolve_columns(records, schema);
  if (cols.first_data >= records.size()) {
    throw DataError("'" + path + "' holds no data rows");
  }

  std::vector<double> y;
  std::vector<int> z;
  std::vector<double> xflat;  // row major
  const std::size_t p = cols.covariates.size();

  for (std::size_t r = cols.first_data; r < records.size(); ++r) {
    const std::vector<std::string>& row = records[r];
    const std::string row_tag = "row " + std::to_string(r + 1);
    if (row.size() != cols.width) {
      throw DataError(row_tag + " has " + std::to_string(row.size()) + " fields; expected " +
                      std::to_string(cols.width));
    }

    double value = 0.0;
    if (!parse_double_cell(row[cols.outcome], value) || !std::isfinite(value)) {
      throw DataError(row_tag + ": cannot parse outcome value '" + row[cols.outcome] + "'");
    }
    y.push_back(value);

    double treat = 0.0;
    if (!parse_double_cell(row[cols.treatment], treat) ||
        !(treat == 0.0 || treat == 1.0)) {
      throw DataError(row_tag + ": treatment value '" + row[cols.treatment] +
                      "' is not 0 or 1");
    }
    z.push_back(static_cast<int>(treat));

    for (std::size_t j = 0; j < p; ++j) {
      if (!parse_double_cell(row[cols.covariates[j]], value) || !std::isfinite(value)) {
        throw DataError(row_tag + ": cannot parse covariate value '" +
                        row[cols.covariates[j]] + "'");
      }
      xflat.push_back(value);
    }
  }

  std::size_t m = 0;
  for (int zi : z) m += static_cast<std::size_t>(zi);
  if (m == 0 || m == z.size()) {
    throw DataError("treatment column is constant; both arms are needed");
  }

  std::optional<Eigen::MatrixXd> x;
  if (p > 0) {
    Eigen::MatrixXd mat(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < y.size(); ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xflat[i * p + j];
      }
    }
    x = std::move(mat);
  }
  return Experiment(std::move(y), std::move(z), std::move(x));
}

void write_experiment_csv(const std::string& path, const Experiment& exp,
                          const DatasetSchema& schema) {
  const std::size_t p = schema.covariate_cols.size();
  const std::size_t have =
      exp.x.has_value() ? static_cast<std::size_t>(exp.x->cols()) : 0;
  if (p != have) {
    throw InvalidInput("write_experiment_csv: schema names " + std::to_string(p) +
                       " covariate columns but the experiment has " + std::to_string(have));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");

  if (schema.has_header) {
    out << quote_field(schema.outcome_col) << ',' << quote_field(schema.treatment_col);
    for (const std::string& name : schema.covariate_cols) out << ',' << quote_field(name);
    out << '\n';
  }
  for (std::size_t i = 0; i < exp.size(); ++i) {
    out << fmt_g17(exp.y[i]) << ',' << exp.z[i];
    for (std::size_t j = 0; j < p; ++j) {
      out << ',' << fmt_g17((*exp.x)(static_cast<Eigen::Index>(i),
                                     static_cast<Eigen::Index>(j)));
    }
    out << '\n';
  }
  if (!out) throw DataError("short write to '" + path + "'");
}

AnalysisReport analyze(const Experiment& exp, const AnalysisConfig& config) {
  if (config.methods.empty()) throw InvalidInput("analyze: no methods requested");
  if (!(config.level > 0.0 && config.level < 1.0)) {
    throw InvalidInput("analyze: confidence level must lie strictly between 0 and 1");
  }

  AnalysisReport report;
  report.level = config.level;
  report.seed = config.seed;
  report.config_hash = config_hash_of(config);
  if (iqr(exp.y) > 100.0) {
    report.warnings.push_back(
        "outcome interquartile range exceeds 100; the interval width is scale"
        " sensitive, consider rescaling the outcome");
  }

  const std::size_t n = exp.size();
  const std::size_t m = exp.treated_count();
  for (Method method : config.methods) {
    AnalysisRow row;
    row.method = method;
    row.name = method_name(method);
    try {
      Estimate est;
      ConfidenceInterval ci{};
      double se = 0.0;
      switch (method) {
        case Method::diff_means: {
          est = diff_in_means(exp);
          if (!est.se) throw NumericError("difference in means has no standard error here");
          se = *est.se;
          ci = normal_ci(est.point, se, config.level);
          break;
        }
        case Method::rank: {
          est = rank_unadjusted(exp);
          const DensityFunctionalEstimate f =
              density_functional_plugin(exp, est.point, config.nu);
          se = standard_error_from_functional(f, n, m);
          ci = rank_ci(est.point, f, n, m, config.level);
          break;
        }
        case Method::rank_adjusted: {
          est = rank_adjusted(exp);
          const DensityFunctionalEstimate f =
              density_functional_adjusted(exp, est.point, config.nu);
          se = standard_error_from_functional(f, n, m);
          ci = rank_ci(est.point, f, n, m, config.level);
          break;
        }
        case Method::ols: {
          est = ols_adjusted(exp);
          if (!est.se) throw NumericError("regression fit produced no standard error");
          se = *est.se;
          ci = normal_ci(est.point, se, config.level);
          break;
        }
        case Method::lin: {
          est = lin_interaction(exp);
          if (!est.se) throw NumericError("regression fit produced no standard error");
          se = *est.se;
          ci = normal_ci(est.point, se, config.level);
          break;
        }
      }
      row.estimate = est.point;
      row.std_error = se;
      row.ci_lo = ci.lo;
      row.ci_hi = ci.hi;
      row.length = ci.hi - ci.lo;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

Method method_from_name(const std::string& name) {
  if (name == "diff_in_means" || name == "dm") return Method::diff_means;
  if (name == "rank_unadjusted" || name == "rank") return Method::rank;
  if (name == "rank_adjusted" || name == "rank_adj") return Method::rank_adjusted;
  if (name == "ols_adjusted" || name == "ols") return Method::ols;
  if (name == "lin_interaction" || name == "lin") return Method::lin;
  throw InvalidInput("unknown method '" + name + "'");
}

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::normal:
      return "normal";
    case ErrorKind::t1:
      return "t1";
    case ErrorKind::t3:
      return "t3";
  }
  return "unknown";
}

ErrorKind error_kind_from_name(const std::string& name) {
  if (name == "normal") return ErrorKind::normal;
  if (name == "t1") return ErrorKind::t1;
  if (name == "t3") return ErrorKind::t3;
  throw InvalidInput("unknown error kind '" + name + "' (use normal, t1, or t3)");
}

std::string render_analysis_csv(const AnalysisReport& report) {
  std::string out = "method,estimate,std_error,ci_lo,ci_hi,length\n";
  for (const AnalysisRow& row : report.rows) {
    out += quote_field(row.name);
    for (const std::optional<double>* field :
         {&row.estimate, &row.std_error, &row.ci_lo, &row.ci_hi, &row.length}) {
      out += ',';
      if (field->has_value()) out += fmt_g17(**field);
    }
    out += '\n';
  }
  return out;
}

std::string render_analysis_json(const AnalysisReport& report) {
  json doc;
  doc["kind"] = "analysis";
  doc["level"] = report.level;
  doc["provenance"]["version"] = kVersion;
  doc["provenance"]["seed"] = report.seed;
  doc["provenance"]["config_hash"] = report.config_hash;
  doc["rows"] = json::array();
  for (const AnalysisRow& row : report.rows) {
    json r;
    r["method"] = row.name;
    r["estimate"] = optional_json(row.estimate);
    r["std_error"] = optional_json(row.std_error);
    r["ci_lo"] = optional_json(row.ci_lo);
    r["ci_hi"] = optional_json(row.ci_hi);
    r["length"] = optional_json(row.length);
    r["error"] = row.error.empty() ? json(nullptr) : json(row.error);
    doc["rows"].push_back(std::move(r));
  }
  doc["warnings"] = report.warnings;
  return doc.dump(2) + "\n";
}

std::string render_simulation_csv(const SimulationReport& report) {
  std::string out = "method,coverage,mean_length,mc_se,exclusions\n";
  for (const MethodSummary& row : report.rows) {
    out += quote_field(row.name);
    out += ',';
    out += fmt_g17(row.coverage);
    out += ',';
    out += fmt_g17(row.mean_length);
    out += ',';
    out += fmt_g17(row.mc_se_coverage);
    out += ',';
    out += std::to_string(row.exclusions);
    out += '\n';
  }
  return out;
}

std::string render_simulation_json(const SimulationReport& report,
                                   const std::string& config_hash) {
  json doc;
  doc["kind"] = "simulation";
  doc["provenance"]["version"] = kVersion;
  doc["provenance"]["seed"] = report.setting.base_seed;
  doc["provenance"]["config_hash"] = config_hash;
  doc["setting"]["id"] = report.setting.id;
  doc["setting"]["n"] = report.setting.n;
  doc["setting"]["prop_treated"] = report.setting.prop_treated;
  doc["setting"]["tau0"] = report.setting.tau0;
  doc["setting"]["error"] = error_kind_name(report.setting.error);
  doc["setting"]["reps"] = report.setting.reps;
  doc["setting"]["base_seed"] = report.setting.base_seed;
  doc["setting"]["nu"] = report.setting.nu.nu;
  doc["setting"]["level"] = report.setting.level;
  doc["oracle"] = report.oracle;
  doc["rows"] = json::array();
  for (const MethodSummary& row : report.rows) {
    json r;
    r["method"] = row.name;
    r["coverage"] = row.coverage;
    r["mean_length"] = row.mean_length;
    r["mc_se_coverage"] = row.mc_se_coverage;
    r["exclusions"] = row.exclusions;
    doc["rows"].push_back(std::move(r));
  }
  return doc.dump(2) + "\n";
}

std::string config_hash_of(const AnalysisConfig& config) {
  std::string storage;
  std::string canon = "analyze|methods=" + joined_method_names(config.methods) +
                      "|level=" + fmt_g17(config.level) + "|nu=" + fmt_g17(config.nu.nu) +
                      "|tie=" + tie_policy_tag(config.tie_policy, storage) +
                      "|seed=" + std::to_string(config.seed);
  return fnv1a_hex(canon);
}

std::string config_hash_of(const SimulationSetting& setting,
                           const std::vector<Method>& methods, bool oracle) {
  std::string canon = std::string("simulate|id=") + std::to_string(setting.id) +
                      "|n=" + std::to_string(setting.n) +
                      "|prop=" + fmt_g17(setting.prop_treated) +
                      "|tau0=" + fmt_g17(setting.tau0) +
                      "|error=" + error_kind_name(setting.error) +
                      "|reps=" + std::to_string(setting.reps) +
                      "|seed=" + std::to_string(setting.base_seed) +
                      "|nu=" + fmt_g17(setting.nu.nu) +
                      "|level=" + fmt_g17(setting.level) +
                      "|methods=" + joined_method_names(methods) +
                      "|oracle=" + (oracle ? "1" : "0");
  return fnv1a_hex(canon);
}

}  // namespace rankshift
