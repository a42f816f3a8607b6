#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "bpce/basis.hpp"
#include "bpce/bench.hpp"
#include "bpce/detsolve.hpp"
#include "bpce/diagnostics.hpp"
#include "bpce/errors.hpp"
#include "bpce/posterior.hpp"
#include "bpce/select.hpp"

namespace bpce {

using json = nlohmann::ordered_json;

namespace detail {

// Shortest round-trip decimal rendering for CSV output.
inline std::string format_double(double x) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s) {
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{}) throw ConfigError("invalid numeric field: '" + s + "'");
  return value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Basis JSON
// ---------------------------------------------------------------------------

inline json basis_to_json(const MultiIndexBasis& basis) {
  json doc;
  doc["input_dim"] = basis.input_dim();
  doc["degree"] = basis.degree();
  doc["size"] = basis.size();
  json dims = json::array();
  for (int j = 0; j < basis.input_dim(); ++j) {
    const UnivariatePolySet& set = basis.univariate(j);
    json entry;
    entry["degree"] = set.degree;
    entry["hankel_condition"] = set.hankel_condition;
    entry["standardization"] = {{"shift", set.standardization.shift},
                                {"scale", set.standardization.scale}};
    json rows = json::array();
    for (int a = 0; a <= set.degree; ++a) {
      json row = json::array();
      for (int i = 0; i <= a; ++i) row.push_back(set.coeff(a, i));
      rows.push_back(row);
    }
    entry["coefficients"] = rows;
    json norms = json::array();
    for (int a = 0; a <= set.degree; ++a) norms.push_back(set.norms[a]);
    entry["norms"] = norms;
    dims.push_back(entry);
  }
  doc["dimensions"] = dims;
  return doc;
}

inline BasisPtr basis_from_json(const json& doc) {
  if (!doc.contains("dimensions") || !doc.contains("degree"))
    throw ConfigError("basis document missing required keys");
  const int degree = doc.at("degree").get<int>();
  std::vector<UnivariatePolySet> sets;
  for (const json& entry : doc.at("dimensions")) {
    UnivariatePolySet set;
    set.degree = entry.at("degree").get<int>();
    if (entry.contains("hankel_condition"))
      set.hankel_condition = entry.at("hankel_condition").get<double>();
    set.standardization.shift = entry.at("standardization").at("shift").get<double>();
    set.standardization.scale = entry.at("standardization").at("scale").get<double>();
    set.coeff = Eigen::MatrixXd::Zero(set.degree + 1, set.degree + 1);
    const json& rows = entry.at("coefficients");
    for (int a = 0; a <= set.degree; ++a)
      for (int i = 0; i <= a; ++i) set.coeff(a, i) = rows.at(a).at(i).get<double>();
    set.norms.resize(set.degree + 1);
    for (int a = 0; a <= set.degree; ++a) set.norms[a] = entry.at("norms").at(a).get<double>();
    sets.push_back(std::move(set));
  }
  return std::make_shared<const MultiIndexBasis>(std::move(sets), degree);
}

// ---------------------------------------------------------------------------
// Deterministic fit JSON
// ---------------------------------------------------------------------------

inline json fit_to_json(const DeterministicFit& fit) {
  json doc;
  doc["method"] = method_name(fit.method);
  doc["lambda"] = fit.lambda;
  doc["residual_norm"] = fit.residual_norm;
  doc["coefficients"] = std::vector<double>(fit.coeffs.data(),
                                            fit.coeffs.data() + fit.coeffs.size());
  return doc;
}

// ---------------------------------------------------------------------------
// Selection JSON
// ---------------------------------------------------------------------------

inline json selection_to_json(const SelectionResult& sel, const MultiIndexBasis* basis) {
  json doc;
  doc["method"] = method_name(sel.method);
  doc["m_sel"] = sel.m_sel;
  doc["indices"] = sel.indices;
  if (basis) {
    json degrees = json::array();
    for (int idx : sel.indices) degrees.push_back(basis->multi_indices()[idx]);
    doc["degrees"] = degrees;
  }
  doc["path_order"] = sel.path_order;
  doc["entry_lambda"] = sel.entry_lambda;
  doc["truncated_path"] = sel.truncated_path;
  return doc;
}

inline SelectionResult selection_from_json(const json& doc) {
  SelectionResult sel;
  const std::string method = doc.at("method").get<std::string>();
  sel.method = method == "projpred" ? SelectionResult::Method::Projpred
                                    : SelectionResult::Method::SobolGreedy;
  sel.m_sel = doc.at("m_sel").get<int>();
  sel.indices = doc.at("indices").get<std::vector<int>>();
  if (doc.contains("path_order")) sel.path_order = doc.at("path_order").get<std::vector<int>>();
  if (doc.contains("truncated_path")) sel.truncated_path = doc.at("truncated_path").get<bool>();
  return sel;
}

// ---------------------------------------------------------------------------
// Draws CSV
// ---------------------------------------------------------------------------

inline void write_draws_csv(std::ostream& os, const PosteriorDraws& draws) {
  os << "chain,iteration";
  for (const auto& name : draws.names) os << ',' << name;
  os << '\n';
  for (long s = 0; s < draws.draws.rows(); ++s) {
    os << draws.chain[s] << ',' << draws.iteration[s];
    for (long c = 0; c < draws.draws.cols(); ++c)
      os << ',' << detail::format_double(draws.draws(s, c));
    os << '\n';
  }
}

inline void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  write_draws_csv(os, draws);
}

inline PosteriorDraws read_draws_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("draws CSV is empty");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "chain" || header[1] != "iteration")
    throw ConfigError("draws CSV must start with chain,iteration columns");

  PosteriorDraws draws;
  draws.names.assign(header.begin() + 2, header.end());
  std::vector<std::vector<double>> rows;
  std::vector<int> chains, iterations;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) throw ConfigError("draws CSV has a ragged row");
    chains.push_back(static_cast<int>(detail::parse_double(fields[0])));
    iterations.push_back(static_cast<int>(detail::parse_double(fields[1])));
    std::vector<double> row(fields.size() - 2);
    for (std::size_t i = 2; i < fields.size(); ++i) row[i - 2] = detail::parse_double(fields[i]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("draws CSV has no draws");

  const long s_total = static_cast<long>(rows.size());
  const int p = static_cast<int>(draws.names.size());
  draws.draws.resize(s_total, p);
  draws.chain.resize(s_total);
  draws.iteration.resize(s_total);
  draws.divergent.assign(s_total, 0);
  draws.treedepth = Eigen::VectorXi::Zero(s_total);
  int max_chain = 0;
  for (long s = 0; s < s_total; ++s) {
    draws.chain[s] = chains[s];
    draws.iteration[s] = iterations[s];
    max_chain = std::max(max_chain, chains[s]);
    for (int c = 0; c < p; ++c) draws.draws(s, c) = rows[s][c];
  }
  draws.n_chains = max_chain + 1;
  if (s_total % draws.n_chains != 0)
    throw ConfigError("draws CSV has unequal chain lengths");
  draws.n_warmup = 0;
  draws.n_iterations = static_cast<int>(s_total / draws.n_chains);

  // Recover the PCE column metadata from the header names.
  for (int c = 0; c < p; ++c) {
    const std::string& name = draws.names[c];
    if (name == "sigma") {
      draws.sigma_col = c;
    } else if (name == "r2") {
      draws.r2_col = c;
    } else if (name.size() > 1 && name[0] == 'c' &&
               name.find_first_not_of("0123456789", 1) == std::string::npos) {
      draws.coef_cols.push_back(c);
      draws.coef_labels.push_back(std::stoi(name.substr(1)));
    }
  }
  return draws;
}

inline PosteriorDraws read_draws_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open draws CSV: " + path);
  return read_draws_csv(is);
}

// ---------------------------------------------------------------------------
// Diagnostics JSON
// ---------------------------------------------------------------------------

inline json diagnostics_to_json(const Diagnostics& diag) {
  json doc;
  doc["max_rhat"] = diag.max_rhat;
  doc["min_ess_bulk"] = diag.min_ess_bulk;
  doc["divergences"] = diag.divergences;
  doc["chain_accept"] = std::vector<double>(
      diag.chain_accept.data(), diag.chain_accept.data() + diag.chain_accept.size());
  json params = json::array();
  for (std::size_t i = 0; i < diag.names.size(); ++i) {
    params.push_back({{"name", diag.names[i]},
                      {"rhat", diag.rhat[static_cast<long>(i)]},
                      {"ess_bulk", diag.ess_bulk[static_cast<long>(i)]},
                      {"ess_tail", diag.ess_tail[static_cast<long>(i)]}});
  }
  doc["parameters"] = params;
  return doc;
}

// ---------------------------------------------------------------------------
// Sobol report CSV (Table-1 layout)
// ---------------------------------------------------------------------------

inline void write_sobol_csv(std::ostream& os, const SobolReport& report,
                            const MultiIndexBasis* basis) {
  os << "index";
  const int n_dim = basis ? basis->input_dim() : 0;
  for (int j = 1; j <= n_dim; ++j) os << ",d" << j;
  os << ",mean,ci_low,ci_high,ci99_low,ci99_high\n";
  for (int rank : report.ranking) {
    const int idx = report.basis_index[rank];
    os << idx;
    if (basis)
      for (int j = 0; j < n_dim; ++j) os << ',' << basis->multi_indices()[idx][j];
    os << ',' << detail::format_double(report.mean[rank]) << ','
       << detail::format_double(report.ci95_low[rank]) << ','
       << detail::format_double(report.ci95_high[rank]) << ','
       << detail::format_double(report.ci99_low[rank]) << ','
       << detail::format_double(report.ci99_high[rank]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Experiment reports
// ---------------------------------------------------------------------------

inline json experiment_to_json(const ExperimentReport& report) {
  json doc;
  doc["problem"] = report.problem;
  doc["design"] = report.design;
  doc["degree"] = report.degree;
  doc["T"] = report.t;
  doc["M"] = report.m;
  doc["noise_sd"] = report.noise_sd;
  doc["noise_seed"] = report.noise_seed;
  doc["flagged"] = report.flagged;
  doc["t_test"] = report.t_test;
  doc["test_seed"] = report.test_seed;
  if (report.design == "sobol-sequence") doc["sobol_start_index"] = report.sobol_start_index;
  json rows = json::array();
  for (const MetricRow& row : report.rows) {
    json r;
    r["model"] = row.model;
    r["T"] = row.t;
    r["M"] = row.m;
    r["mean_bias"] = std::isfinite(row.mean_bias) ? json(row.mean_bias) : json(nullptr);
    r["sd_bias"] = std::isfinite(row.sd_bias) ? json(row.sd_bias) : json(nullptr);
    r["rmse"] = std::isfinite(row.rmse) ? json(row.rmse) : json(nullptr);
    r["fit_seconds"] = row.fit_seconds;
    r["rhat_max"] = std::isfinite(row.rhat_max) ? json(row.rhat_max) : json(nullptr);
    r["divergences"] = row.divergences;
    rows.push_back(r);
  }
  doc["rows"] = rows;
  doc["projpred_selection"] = report.projpred_selection;
  doc["sobol_selection"] = report.sobol_selection;
  return doc;
}

inline void write_experiment_csv_header(std::ostream& os) {
  os << "problem,design,degree,noise_sd,T,M,method,mean_bias,sd_bias,rmse,fit_seconds,"
        "rhat_max,divergences\n";
}

inline void write_experiment_csv_rows(std::ostream& os, const ExperimentReport& report) {
  const auto field = [](double v) {
    return std::isfinite(v) ? detail::format_double(v) : std::string("nan");
  };
  for (const MetricRow& row : report.rows) {
    os << report.problem << ',' << report.design << ',' << report.degree << ','
       << detail::format_double(report.noise_sd) << ',' << row.t << ',' << row.m << ','
       << row.model << ',' << field(row.mean_bias) << ',' << field(row.sd_bias) << ','
       << field(row.rmse) << ',' << detail::format_double(row.fit_seconds) << ','
       << field(row.rhat_max) << ',' << row.divergences << '\n';
  }
}

// Long format for external plotting: one (cell, model, metric) per row.
inline void write_experiment_long_csv_header(std::ostream& os) {
  os << "problem,design,degree,noise_sd,T,M,model,metric,value\n";
}

inline void write_experiment_long_csv_rows(std::ostream& os, const ExperimentReport& report) {
  for (const MetricRow& row : report.rows) {
    const auto emit = [&](const char* metric, double value) {
      if (!std::isfinite(value)) return;
      os << report.problem << ',' << report.design << ',' << report.degree << ','
         << detail::format_double(report.noise_sd) << ',' << row.t << ',' << row.m << ','
         << row.model << ',' << metric << ',' << detail::format_double(value) << '\n';
    };
    emit("mean_bias", row.mean_bias);
    emit("sd_bias", row.sd_bias);
    emit("rmse", row.rmse);
    emit("fit_seconds", row.fit_seconds);
    emit("rhat_max", row.rhat_max);
    emit("divergences", row.divergences);
  }
}

// ---------------------------------------------------------------------------
// Tabular CSV (header row, N input columns, response in the last column)
// ---------------------------------------------------------------------------

inline TrainingSet read_tabular_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("tabular CSV is empty");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2)
    throw ConfigError("tabular CSV needs at least one input column and a response");
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) throw ConfigError("tabular CSV has a ragged row");
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row[i] = detail::parse_double(fields[i]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("tabular CSV has no data rows");
  TrainingSet data;
  const int n_dim = static_cast<int>(header.size()) - 1;
  data.inputs.resize(static_cast<long>(rows.size()), n_dim);
  data.y.resize(static_cast<long>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int j = 0; j < n_dim; ++j) data.inputs(static_cast<long>(r), j) = rows[r][j];
    data.y[static_cast<long>(r)] = rows[r][n_dim];
  }
  return data;
}

inline TrainingSet read_tabular_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open tabular CSV: " + path);
  return read_tabular_csv(is);
}

inline void write_json_file(const std::string& path, const json& doc) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  os << doc.dump(2) << '\n';
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open JSON file: " + path);
  json doc;
  try {
    is >> doc;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return doc;
}

}  // namespace bpce
