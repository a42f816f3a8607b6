// Command-line front end for the Bayesian sparse PCE pipeline.
//
// Subcommands: basis, fit, select, refit, predict, benchmark, diagnose.
// One JSON config document drives a run; --set key.path=value overrides
// individual keys. Exit codes: 0 success, 1 config error, 2 basis error,
// 3 sampler error, 4 shape/compatibility error.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bpce/bpce.hpp"

namespace fs = std::filesystem;
using bpce::json;

namespace {

// ---------------------------------------------------------------------------
// Config handling
// ---------------------------------------------------------------------------

const std::map<std::string, std::vector<std::string>> kSchema = {
    {"problem", {"name", "a", "b", "a_vector", "data_file"}},
    {"design", {"kind", "T", "skip", "seed", "file", "noise_sd", "noise_seed"}},
    {"basis", {"degree", "input_dim"}},
    {"prior", {"mode", "zeta", "nu", "theta_scalar", "sigma_scale", "lambda"}},
    {"sampler",
     {"chains", "iterations", "warmup", "seed", "target_accept", "max_treedepth", "init",
      "threads"}},
    {"selection", {"method", "m_sel"}},
    {"predict", {"inputs", "include_noise", "noise_seed", "draws", "basis"}},
    {"benchmark",
     {"t_grid", "degree_grid", "noise_sd", "replicates", "t_test", "test_seed", "workers",
      "designs"}},
    {"output", {"dir", "prefix"}},
};

void validate_config(const json& cfg) {
  if (!cfg.is_object()) throw bpce::ConfigError("config must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    if (key == "verbosity") continue;
    const auto section = kSchema.find(key);
    if (section == kSchema.end())
      throw bpce::ConfigError("unknown config key: '" + key + "'");
    if (!value.is_object())
      throw bpce::ConfigError("config section '" + key + "' must be an object");
    for (const auto& [sub, ignored] : value.items()) {
      (void)ignored;
      if (std::find(section->second.begin(), section->second.end(), sub) ==
          section->second.end())
        throw bpce::ConfigError("unknown config key: '" + key + "." + sub + "'");
    }
  }
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw bpce::ConfigError("--set expects key.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (...) {
    value = raw;  // plain strings need no quoting on the command line
  }
  json* node = &cfg;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw bpce::ConfigError("--set has an empty path segment");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json cfg = path.empty() ? json::object() : bpce::read_json_file(path);
  for (const auto& assignment : overrides) apply_override(cfg, assignment);
  validate_config(cfg);
  return cfg;
}

template <class T>
T get_or(const json& cfg, const std::string& section, const std::string& key, T fallback) {
  if (!cfg.contains(section)) return fallback;
  const json& node = cfg.at(section);
  if (!node.contains(key)) return fallback;
  try {
    return node.at(key).get<T>();
  } catch (const std::exception&) {
    throw bpce::ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

// ---------------------------------------------------------------------------
// Pieces assembled from the config
// ---------------------------------------------------------------------------

struct ProblemBundle {
  bpce::BenchmarkProblem problem;
  std::optional<bpce::TrainingSet> tabular;
};

ProblemBundle problem_from_config(const json& cfg) {
  const std::string name = get_or<std::string>(cfg, "problem", "name", "ishigami");
  ProblemBundle bundle;
  if (name == "ishigami") {
    bundle.problem = bpce::make_ishigami(get_or<double>(cfg, "problem", "a", 7.0),
                                         get_or<double>(cfg, "problem", "b", 0.1));
  } else if (name == "sobol-g") {
    Eigen::VectorXd a = bpce::default_sobol_g_coefficients();
    if (cfg.contains("problem") && cfg.at("problem").contains("a_vector")) {
      const auto values = cfg.at("problem").at("a_vector").get<std::vector<double>>();
      a = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
    }
    bundle.problem = bpce::make_sobol_g(a);
  } else if (name == "signum") {
    bundle.problem = bpce::make_signum();
  } else if (name == "tabular") {
    const std::string file = get_or<std::string>(cfg, "problem", "data_file", "");
    if (file.empty()) throw bpce::ConfigError("tabular problems need problem.data_file");
    bundle.tabular = bpce::read_tabular_csv_file(file);
    bundle.problem = bpce::make_tabular(bundle.tabular->inputs, bundle.tabular->y);
  } else {
    throw bpce::ConfigError("unknown problem name: '" + name + "'");
  }
  return bundle;
}

bpce::DesignSpec design_from_config(const json& cfg) {
  bpce::DesignSpec spec;
  const std::string kind = get_or<std::string>(cfg, "design", "kind", "sobol-sequence");
  if (kind == "sobol-sequence")
    spec.kind = bpce::DesignSpec::Kind::SobolSequence;
  else if (kind == "gauss-quadrature-grid")
    spec.kind = bpce::DesignSpec::Kind::GaussQuadratureGrid;
  else if (kind == "equidistant-grid")
    spec.kind = bpce::DesignSpec::Kind::EquidistantGrid;
  else if (kind == "file")
    spec.kind = bpce::DesignSpec::Kind::File;
  else
    throw bpce::ConfigError("unknown design kind: '" + kind + "'");
  spec.t = get_or<long>(cfg, "design", "T", 100);
  spec.skip = get_or<long>(cfg, "design", "skip", 0);
  spec.seed = get_or<std::uint64_t>(cfg, "design", "seed", 0);
  spec.file = get_or<std::string>(cfg, "design", "file", "");
  return spec;
}

struct TrainingBundle {
  Eigen::MatrixXd inputs;  // full problem dimension
  Eigen::VectorXd y;
};

TrainingBundle training_from_config(const ProblemBundle& bundle, const json& cfg) {
  TrainingBundle data;
  const bpce::DesignSpec spec = design_from_config(cfg);
  if (bundle.tabular) {
    data.inputs = bundle.tabular->inputs;
    data.y = bundle.tabular->y;
  } else if (spec.kind == bpce::DesignSpec::Kind::File) {
    if (spec.file.empty()) throw bpce::ConfigError("design.kind=file needs design.file");
    const bpce::TrainingSet loaded = bpce::read_tabular_csv_file(spec.file);
    data.inputs = loaded.inputs;
    data.y = loaded.y;
  } else {
    data.inputs = bpce::make_design(bundle.problem, spec);
    data.y.resize(data.inputs.rows());
    for (long r = 0; r < data.inputs.rows(); ++r)
      data.y[r] = bundle.problem.evaluator(data.inputs.row(r).transpose());
  }
  const double noise_sd = get_or<double>(cfg, "design", "noise_sd", 0.0);
  if (noise_sd > 0.0)
    data.y = bpce::add_noise(data.y, noise_sd,
                             get_or<std::uint64_t>(cfg, "design", "noise_seed", 0));
  return data;
}

int basis_input_dim(const ProblemBundle& bundle, const json& cfg) {
  const int dims = get_or<int>(cfg, "basis", "input_dim", bundle.problem.input_dim);
  if (dims < 1 || dims > bundle.problem.input_dim)
    throw bpce::ConfigError("basis.input_dim must be in [1, problem dimension]");
  return dims;
}

bpce::BasisPtr basis_from_config(const ProblemBundle& bundle, const TrainingBundle& data,
                                 const json& cfg) {
  const int degree = get_or<int>(cfg, "basis", "degree", 10);
  const int dims = basis_input_dim(bundle, cfg);
  std::vector<bpce::MomentSequence> moments;
  moments.reserve(dims);
  for (int j = 0; j < dims; ++j) {
    if (bundle.problem.evaluator) {
      const auto [lo, hi] = bundle.problem.bounds[j];
      moments.push_back(bpce::moments_uniform(lo, hi, degree, j));
    } else {
      const Eigen::VectorXd col = data.inputs.col(j);
      moments.push_back(bpce::moments_from_samples(
          std::span<const double>(col.data(), col.size()), degree, j));
    }
  }
  return bpce::make_basis(std::move(moments), degree);
}

bpce::R2D2Config r2d2_from_config(const Eigen::VectorXd& y, int m, const json& cfg) {
  const double zeta = get_or<double>(cfg, "prior", "zeta", 0.5);
  const double nu = get_or<double>(cfg, "prior", "nu", 2.0);
  bpce::R2D2Config prior = bpce::default_r2d2_config(y, zeta, nu);
  prior.theta =
      Eigen::VectorXd::Constant(m - 1, get_or<double>(cfg, "prior", "theta_scalar", 1.0));
  if (cfg.contains("prior") && cfg.at("prior").contains("sigma_scale") &&
      cfg.at("prior").at("sigma_scale").is_number())
    prior.sigma_scale = cfg.at("prior").at("sigma_scale").get<double>();
  return prior;
}

bpce::SamplerConfig sampler_from_config(const json& cfg) {
  bpce::SamplerConfig sampler;
  sampler.chains = get_or<int>(cfg, "sampler", "chains", 2);
  sampler.iterations = get_or<int>(cfg, "sampler", "iterations", 2000);
  sampler.warmup = get_or<int>(cfg, "sampler", "warmup", 1000);
  sampler.seed = get_or<std::uint64_t>(cfg, "sampler", "seed", 1);
  sampler.target_accept = get_or<double>(cfg, "sampler", "target_accept", 0.8);
  sampler.max_treedepth = get_or<int>(cfg, "sampler", "max_treedepth", 10);
  sampler.threads = get_or<int>(cfg, "sampler", "threads", 0);
  const std::string init = get_or<std::string>(cfg, "sampler", "init", "random-diffuse");
  if (init == "random-diffuse")
    sampler.init = bpce::SamplerConfig::Init::RandomDiffuse;
  else if (init == "mle")
    sampler.init = bpce::SamplerConfig::Init::Mle;
  else if (init == "given-point")
    throw bpce::ConfigError("sampler.init=given-point is only usable via the library API");
  else
    throw bpce::ConfigError("unknown sampler.init: '" + init + "'");
  return sampler;
}

fs::path output_path(const json& cfg, const std::string& file) {
  const std::string dir = get_or<std::string>(cfg, "output", "dir", ".");
  const std::string prefix = get_or<std::string>(cfg, "output", "prefix", "");
  fs::create_directories(dir);
  return fs::path(dir) / (prefix + file);
}

// Wall-clock timing goes to a sidecar log; main outputs stay byte-identical
// across reruns of the same config and seeds.
void log_sidecar(const json& cfg, const std::string& command, double seconds) {
  std::ofstream log(output_path(cfg, "run.log"), std::ios::app);
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%d %H:%M:%S", std::localtime(&now));
  log << stamp << " command=" << command << " seconds=" << seconds << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_basis(const json& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const ProblemBundle bundle = problem_from_config(cfg);
  const TrainingBundle data = training_from_config(bundle, cfg);
  const bpce::BasisPtr basis = basis_from_config(bundle, data, cfg);
  bpce::write_json_file(output_path(cfg, "basis.json").string(), bpce::basis_to_json(*basis));
  log_sidecar(cfg, "basis",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  double worst_condition = 1.0;
  for (int j = 0; j < basis->input_dim(); ++j)
    worst_condition = std::max(worst_condition, basis->univariate(j).hankel_condition);
  std::cout << "basis: M=" << basis->size() << " N=" << basis->input_dim()
            << " d=" << basis->degree() << " hankel_condition=" << worst_condition << "\n";
  return 0;
}

struct FitArtifacts {
  bpce::BasisPtr basis;
  bpce::DesignMatrix design;
  Eigen::VectorXd y;
  bpce::PriorMode mode;
};

FitArtifacts prepare_fit(const json& cfg) {
  FitArtifacts art;
  const ProblemBundle bundle = problem_from_config(cfg);
  const TrainingBundle data = training_from_config(bundle, cfg);
  art.basis = basis_from_config(bundle, data, cfg);
  const int dims = art.basis->input_dim();
  art.design = bpce::evaluate_design(art.basis, data.inputs.leftCols(dims));
  art.y = data.y;
  const std::string mode = get_or<std::string>(cfg, "prior", "mode", "r2d2");
  if (mode == "r2d2" || mode.rfind("classical", 0) == 0)
    art.mode = bpce::PriorMode::R2D2;
  else if (mode == "flat")
    art.mode = bpce::PriorMode::Flat;
  else
    throw bpce::ConfigError("unknown prior.mode: '" + mode + "'");
  if (mode.rfind("classical", 0) == 0 && mode != "classical-exact" &&
      mode != "classical-least-squares" && mode != "classical-ridge")
    throw bpce::ConfigError("unknown prior.mode: '" + mode + "'");
  return art;
}

bpce::FitResult run_fit(const FitArtifacts& art, const json& cfg) {
  const bpce::SamplerConfig sampler = sampler_from_config(cfg);
  if (art.mode == bpce::PriorMode::R2D2)
    return bpce::fit_r2d2(art.design.values, art.y,
                          r2d2_from_config(art.y, art.basis->size(), cfg), sampler);
  bpce::FlatPriorConfig prior = bpce::default_flat_config(art.y);
  if (cfg.contains("prior") && cfg.at("prior").contains("sigma_scale") &&
      cfg.at("prior").at("sigma_scale").is_number())
    prior.sigma_scale = cfg.at("prior").at("sigma_scale").get<double>();
  return bpce::fit_flat(art.design.values, art.y, prior, sampler);
}

// Deterministic estimation route; lambda comes explicitly from the config.
int cmd_fit_classical(const json& cfg, const FitArtifacts& art, const std::string& mode) {
  bpce::DeterministicFit fit;
  if (mode == "classical-exact")
    fit = bpce::solve_exact(art.design.values, art.y);
  else if (mode == "classical-least-squares")
    fit = bpce::solve_least_squares(art.design.values, art.y);
  else
    fit = bpce::solve_ridge(art.design.values, art.y, get_or<double>(cfg, "prior", "lambda", 0.0));
  bpce::write_json_file(output_path(cfg, "fit.json").string(), bpce::fit_to_json(fit));
  std::cout << "fit: method=" << bpce::method_name(fit.method)
            << " residual_norm=" << fit.residual_norm << "\n";
  return 0;
}

int cmd_fit(const json& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const FitArtifacts art = prepare_fit(cfg);
  bpce::write_json_file(output_path(cfg, "basis.json").string(),
                        bpce::basis_to_json(*art.basis));
  if (const std::string mode = get_or<std::string>(cfg, "prior", "mode", "r2d2");
      mode.rfind("classical", 0) == 0)
    return cmd_fit_classical(cfg, art, mode);
  try {
    const bpce::FitResult fit = run_fit(art, cfg);
    bpce::write_draws_csv(output_path(cfg, "draws.csv").string(), fit.draws);
    bpce::write_json_file(output_path(cfg, "diagnostics.json").string(),
                          bpce::diagnostics_to_json(fit.diagnostics));
    log_sidecar(
        cfg, "fit",
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    std::cout << "fit: draws=" << fit.draws.n_draws()
              << " max_rhat=" << fit.diagnostics.max_rhat
              << " divergences=" << fit.diagnostics.divergences << "\n";
    return 0;
  } catch (const bpce::SamplerError& e) {
    json failure;
    failure["error"] = e.what();
    bpce::write_json_file(output_path(cfg, "diagnostics.json").string(), failure);
    throw;
  }
}

int cmd_select(const json& cfg, const std::string& draws_path) {
  const auto start = std::chrono::steady_clock::now();
  const FitArtifacts art = prepare_fit(cfg);
  const bpce::PosteriorDraws draws = bpce::read_draws_csv_file(draws_path);
  if (static_cast<int>(draws.coef_cols.size()) != art.basis->size())
    throw bpce::ShapeError("draws do not match the configured basis size");
  const int m_sel = get_or<int>(cfg, "selection", "m_sel", 25);
  const std::string method = get_or<std::string>(cfg, "selection", "method", "projpred");

  bpce::SelectionResult sel;
  if (method == "projpred") {
    sel = bpce::select_projpred(draws, art.design, m_sel);
  } else if (method == "sobol") {
    sel = bpce::select_sobol(bpce::sobol_indices(draws), m_sel);
  } else {
    throw bpce::ConfigError("unknown selection.method: '" + method + "'");
  }
  bpce::write_json_file(output_path(cfg, "selection.json").string(),
                        bpce::selection_to_json(sel, art.basis.get()));
  {
    std::ofstream os(output_path(cfg, "sobol_report.csv"));
    bpce::write_sobol_csv(os, bpce::sobol_indices(draws), art.basis.get());
  }
  log_sidecar(cfg, "select",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  std::cout << "select: method=" << method << " indices=" << sel.indices.size()
            << (sel.truncated_path ? " (path exhausted early)" : "") << "\n";
  return 0;
}

int cmd_refit(const json& cfg, const std::string& selection_path) {
  const auto start = std::chrono::steady_clock::now();
  const FitArtifacts art = prepare_fit(cfg);
  const bpce::SelectionResult sel =
      bpce::selection_from_json(bpce::read_json_file(selection_path));
  for (int idx : sel.indices)
    if (idx < 0 || idx >= art.basis->size())
      throw bpce::ShapeError("selection index out of range for the configured basis");
  const bpce::R2D2Config prior = r2d2_from_config(art.y, art.basis->size(), cfg);
  const bpce::FitResult fit =
      bpce::refit_sparse(sel, art.design, art.y, prior, sampler_from_config(cfg));
  bpce::write_draws_csv(output_path(cfg, "refit_draws.csv").string(), fit.draws);
  bpce::write_json_file(output_path(cfg, "refit_diagnostics.json").string(),
                        bpce::diagnostics_to_json(fit.diagnostics));
  log_sidecar(cfg, "refit",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  std::cout << "refit: coefficients=" << fit.draws.coef_cols.size()
            << " max_rhat=" << fit.diagnostics.max_rhat << "\n";
  return 0;
}

int cmd_predict(const json& cfg, const std::string& draws_path,
                const std::string& basis_path, const std::string& inputs_path) {
  const auto start = std::chrono::steady_clock::now();
  const bpce::BasisPtr basis = bpce::basis_from_json(bpce::read_json_file(basis_path));
  const bpce::PosteriorDraws draws = bpce::read_draws_csv_file(draws_path);

  // Inputs: header + N columns (a response column, when present, is ignored).
  std::ifstream is(inputs_path);
  if (!is) throw bpce::ConfigError("cannot open inputs CSV: " + inputs_path);
  std::string header;
  std::getline(is, header);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      try {
        row.push_back(std::stod(field));
      } catch (...) {
        throw bpce::ConfigError("invalid numeric field in inputs CSV: '" + field + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw bpce::ConfigError("inputs CSV has no rows");
  const int n_cols = static_cast<int>(rows.front().size());
  if (n_cols < basis->input_dim())
    throw bpce::ShapeError("inputs CSV has fewer columns than the basis dimension");
  Eigen::MatrixXd x(rows.size(), basis->input_dim());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int j = 0; j < basis->input_dim(); ++j) x(static_cast<long>(r), j) = rows[r][j];

  const bool include_noise = get_or<bool>(cfg, "predict", "include_noise", false);
  const bpce::PredictiveSample pred =
      bpce::predict(draws, *basis, x, include_noise,
                    get_or<std::uint64_t>(cfg, "predict", "noise_seed", 0));

  std::ofstream os(output_path(cfg, "predictions.csv"));
  os << "mean,sd,ci_low,ci_high\n";
  for (long k = 0; k < pred.mu.cols(); ++k) {
    const Eigen::VectorXd col = pred.mu.col(k);
    os << bpce::detail::format_double(col.mean()) << ','
       << bpce::detail::format_double(bpce::sd_of(col)) << ','
       << bpce::detail::format_double(bpce::empirical_quantile(col, 0.025)) << ','
       << bpce::detail::format_double(bpce::empirical_quantile(col, 0.975)) << '\n';
  }
  log_sidecar(cfg, "predict",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  std::cout << "predict: points=" << pred.mu.cols() << " draws=" << pred.mu.rows() << "\n";
  return 0;
}

int cmd_diagnose(const json& cfg, const std::string& draws_path) {
  const bpce::PosteriorDraws draws = bpce::read_draws_csv_file(draws_path);
  const bpce::Diagnostics diag = bpce::compute_diagnostics(draws);
  bpce::write_json_file(output_path(cfg, "diagnostics.json").string(),
                        bpce::diagnostics_to_json(diag));
  std::cout << "diagnose: max_rhat=" << diag.max_rhat
            << " min_ess_bulk=" << diag.min_ess_bulk << "\n";
  return 0;
}

int cmd_benchmark(const json& cfg, int workers_flag) {
  const auto start = std::chrono::steady_clock::now();
  const ProblemBundle bundle = problem_from_config(cfg);
  const std::string name = bundle.problem.name;

  bpce::ExperimentConfig base;
  base.degree = get_or<int>(cfg, "basis", "degree", 10);
  base.sampler = sampler_from_config(cfg);
  base.selection.m_sel = get_or<int>(cfg, "selection", "m_sel", 25);
  base.t_test = get_or<long>(cfg, "benchmark", "t_test", 500);
  base.test_seed = get_or<std::uint64_t>(cfg, "benchmark", "test_seed", 0);
  base.prior.zeta = get_or<double>(cfg, "prior", "zeta", 0.5);
  base.prior.nu = get_or<double>(cfg, "prior", "nu", 2.0);
  base.prior.theta_scalar = get_or<double>(cfg, "prior", "theta_scalar", 1.0);
  if (get_or<std::string>(cfg, "prior", "mode", "r2d2") == "flat")
    base.prior.mode = bpce::PriorMode::Flat;
  if (cfg.contains("prior") && cfg.at("prior").contains("sigma_scale") &&
      cfg.at("prior").at("sigma_scale").is_number())
    base.prior.sigma_scale = cfg.at("prior").at("sigma_scale").get<double>();

  const std::vector<double> noise_grid =
      get_or<std::vector<double>>(cfg, "benchmark", "noise_sd", {0.0});
  const int replicates = get_or<int>(cfg, "benchmark", "replicates", 1);

  // Build the experiment cells for this problem's grid.
  std::vector<std::function<bpce::ExperimentReport()>> cells;
  if (name == "signum") {
    std::vector<long> degree_grid;
    if (cfg.contains("benchmark") && cfg.at("benchmark").contains("degree_grid"))
      degree_grid = cfg.at("benchmark").at("degree_grid").get<std::vector<long>>();
    else
      for (long d = 1; d <= 10; ++d) degree_grid.push_back(d);
    const std::vector<std::string> designs = get_or<std::vector<std::string>>(
        cfg, "benchmark", "designs", {"gauss-quadrature-grid", "sobol-sequence"});
    int cell_index = 0;
    for (const std::string& design_name : designs)
      for (long d : degree_grid) {
        const auto kind = design_name == "sobol-sequence"
                              ? bpce::DesignSpec::Kind::SobolSequence
                              : bpce::DesignSpec::Kind::GaussQuadratureGrid;
        bpce::ExperimentConfig cell_cfg = base;
        cell_cfg.sampler.seed = base.sampler.seed + 1000003ull * cell_index++;
        cells.emplace_back([d, kind, cell_cfg]() {
          return bpce::run_signum_cell(static_cast<int>(d), kind, cell_cfg);
        });
      }
  } else {
    std::vector<long> t_grid;
    if (cfg.contains("benchmark") && cfg.at("benchmark").contains("t_grid"))
      t_grid = cfg.at("benchmark").at("t_grid").get<std::vector<long>>();
    else if (name == "ishigami")
      t_grid = {10, 25, 50, 100, 200, 286, 400, 800};
    else
      t_grid = {100, 300, 900};
    const bpce::DesignSpec design_template = design_from_config(cfg);
    int cell_index = 0;
    for (long t : t_grid)
      for (double noise : noise_grid)
        for (int rep = 0; rep < replicates; ++rep) {
          bpce::ExperimentConfig cell_cfg = base;
          cell_cfg.noise_sd = noise;
          cell_cfg.noise_seed = get_or<std::uint64_t>(cfg, "design", "noise_seed", 1) + rep;
          cell_cfg.sampler.seed = base.sampler.seed + 1000003ull * cell_index++;
          bpce::DesignSpec spec = design_template;
          spec.t = t;
          const bpce::BenchmarkProblem problem = bundle.problem;
          cells.emplace_back([problem, spec, cell_cfg]() {
            return bpce::run_experiment(problem, spec, cell_cfg);
          });
        }
  }

  // Worker pool over cells; each cell owns its RNG streams.
  int workers = workers_flag > 0 ? workers_flag : get_or<int>(cfg, "benchmark", "workers", 1);
  workers = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
  std::vector<bpce::ExperimentReport> reports(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t id = next.fetch_add(1);
      if (id >= cells.size()) return;
      try {
        reports[id] = cells[id]();
      } catch (...) {
        errors[id] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  json all = json::array();
  for (const auto& report : reports) all.push_back(bpce::experiment_to_json(report));
  bpce::write_json_file(output_path(cfg, "benchmark_reports.json").string(), all);
  {
    std::ofstream os(output_path(cfg, "benchmark_rows.csv"));
    bpce::write_experiment_csv_header(os);
    for (const auto& report : reports) bpce::write_experiment_csv_rows(os, report);
  }
  {
    std::ofstream os(output_path(cfg, "benchmark_long.csv"));
    bpce::write_experiment_long_csv_header(os);
    for (const auto& report : reports) bpce::write_experiment_long_csv_rows(os, report);
  }
  log_sidecar(cfg, "benchmark",
              std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  std::cout << "benchmark: cells=" << cells.size() << " problem=" << name << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian sparse polynomial chaos expansion pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "JSON configuration document");
  app.add_option("--set", overrides, "Override a config key: key.path=value");

  std::string draws_path = "draws.csv";
  std::string selection_path = "selection.json";
  std::string basis_path = "basis.json";
  std::string inputs_path;
  int workers_flag = 0;

  CLI::App* basis_cmd = app.add_subcommand("basis", "Build and export the polynomial basis");
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit the reference Bayesian PCE model");
  CLI::App* select_cmd = app.add_subcommand("select", "Run variable selection on a fit");
  select_cmd->add_option("--draws", draws_path, "Draws CSV from a previous fit");
  CLI::App* refit_cmd = app.add_subcommand("refit", "Refit the selected sparse model");
  refit_cmd->add_option("--selection", selection_path, "Selection JSON");
  CLI::App* predict_cmd = app.add_subcommand("predict", "Predict at new input points");
  predict_cmd->add_option("--draws", draws_path, "Draws CSV");
  predict_cmd->add_option("--basis", basis_path, "Basis JSON");
  predict_cmd->add_option("--inputs", inputs_path, "Inputs CSV (header + N columns)")
      ->required();
  CLI::App* benchmark_cmd =
      app.add_subcommand("benchmark", "Run a benchmark grid from the config");
  benchmark_cmd->add_option("--workers", workers_flag, "Worker pool size for cells");
  CLI::App* diagnose_cmd = app.add_subcommand("diagnose", "Convergence diagnostics of draws");
  diagnose_cmd->add_option("--draws", draws_path, "Draws CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    const json cfg = load_config(config_path, overrides);
    if (basis_cmd->parsed()) return cmd_basis(cfg);
    if (fit_cmd->parsed()) return cmd_fit(cfg);
    if (select_cmd->parsed()) return cmd_select(cfg, draws_path);
    if (refit_cmd->parsed()) return cmd_refit(cfg, selection_path);
    if (predict_cmd->parsed()) return cmd_predict(cfg, draws_path, basis_path, inputs_path);
    if (benchmark_cmd->parsed()) return cmd_benchmark(cfg, workers_flag);
    if (diagnose_cmd->parsed()) return cmd_diagnose(cfg, draws_path);
    std::cerr << "no subcommand given\n";
    return 1;
  } catch (const bpce::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const bpce::BasisError& e) {
    std::cerr << "basis error: " << e.what() << "\n";
    return 2;
  } catch (const bpce::SamplerError& e) {
    std::cerr << "sampler error: " << e.what() << "\n";
    return 3;
  } catch (const bpce::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
