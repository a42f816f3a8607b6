#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "bpce/io.hpp"
#include "bpce/rng.hpp"

using namespace bpce;

TEST_CASE("basis JSON round trip preserves evaluations exactly") {
  std::vector<MomentSequence> mom{moments_uniform(-2.0, 3.0, 6, 0),
                                  moments_gaussian(1.0, 0.5, 6, 1)};
  const BasisPtr basis = make_basis(mom, 6);
  const json doc = basis_to_json(*basis);
  const json reparsed = json::parse(doc.dump());
  const BasisPtr loaded = basis_from_json(reparsed);

  REQUIRE(loaded->size() == basis->size());
  CounterRng rng(1);
  Eigen::MatrixXd x(20, 2);
  for (int r = 0; r < 20; ++r) {
    x(r, 0) = rng.uniform(-2.0, 3.0);
    x(r, 1) = rng.normal() * 0.5 + 1.0;
  }
  const DesignMatrix a = evaluate_design(basis, x);
  const DesignMatrix b = evaluate_design(loaded, x);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deterministic fit JSON carries the contract fields") {
  DeterministicFit fit;
  fit.method = DeterministicFit::Method::Ridge;
  fit.lambda = 0.25;
  fit.residual_norm = 1e-9;
  fit.coeffs = Eigen::Vector3d(1.0, -2.0, 0.125);
  const json doc = fit_to_json(fit);
  CHECK(doc.at("method") == "ridge");
  CHECK(doc.at("lambda") == 0.25);
  CHECK(doc.at("coefficients").size() == 3);
  CHECK(doc.at("coefficients")[1] == -2.0);
}

TEST_CASE("draws CSV round trip") {
  PosteriorDraws draws;
  draws.names = {"c0", "c3", "c17", "sigma", "r2", "phi3", "phi17"};
  const int chains = 2, n = 25;
  draws.n_chains = chains;
  draws.n_warmup = 0;
  draws.n_iterations = n;
  draws.draws.resize(chains * n, 7);
  draws.chain.resize(chains * n);
  draws.iteration.resize(chains * n);
  draws.divergent.assign(chains * n, 0);
  CounterRng rng(9);
  for (int c = 0; c < chains; ++c)
    for (int i = 0; i < n; ++i) {
      const long row = static_cast<long>(c) * n + i;
      draws.chain[row] = c;
      draws.iteration[row] = i;
      for (int p = 0; p < 7; ++p) draws.draws(row, p) = rng.normal() * std::exp(rng.normal());
    }

  std::stringstream buffer;
  write_draws_csv(buffer, draws);
  const PosteriorDraws loaded = read_draws_csv(buffer);

  CHECK(loaded.names == draws.names);
  CHECK(loaded.n_chains == 2);
  CHECK((loaded.draws - draws.draws).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.coef_labels == std::vector<int>{0, 3, 17});
  CHECK(loaded.sigma_col == 3);
  CHECK(loaded.r2_col == 4);
  for (long s = 0; s < loaded.draws.rows(); ++s) CHECK(loaded.chain[s] == draws.chain[s]);
}

TEST_CASE("draws CSV validation") {
  SECTION("missing chain column") {
    std::stringstream bad("iteration,c0\n0,1.0\n");
    CHECK_THROWS_AS(read_draws_csv(bad), ConfigError);
  }
  SECTION("ragged rows") {
    std::stringstream bad("chain,iteration,c0\n0,0,1.0\n0,1\n");
    CHECK_THROWS_AS(read_draws_csv(bad), ConfigError);
  }
  SECTION("unequal chain lengths") {
    std::stringstream bad("chain,iteration,c0\n0,0,1.0\n0,1,2.0\n1,0,3.0\n");
    CHECK_THROWS_AS(read_draws_csv(bad), ConfigError);
  }
}

TEST_CASE("selection JSON round trip") {
  SelectionResult sel;
  sel.method = SelectionResult::Method::Projpred;
  sel.m_sel = 3;
  sel.indices = {0, 24, 3, 19};
  sel.path_order = {24, 3, 19};
  sel.entry_lambda = {1.5, 1.2, 0.8};
  sel.truncated_path = false;

  const BasisPtr basis = make_basis({moments_uniform(-1, 1, 4, 0),
                                     moments_uniform(-1, 1, 4, 1),
                                     moments_uniform(-1, 1, 4, 2)},
                                    4);
  const json doc = selection_to_json(sel, basis.get());
  CHECK(doc.at("method") == "projpred");
  CHECK(doc.at("degrees").size() == 4);
  CHECK(doc.at("degrees")[0] == json::array({0, 0, 0}));

  const SelectionResult loaded = selection_from_json(doc);
  CHECK(loaded.method == SelectionResult::Method::Projpred);
  CHECK(loaded.indices == sel.indices);
  CHECK(loaded.m_sel == 3);
}

TEST_CASE("sobol report CSV mirrors the ranked table layout") {
  PosteriorDraws draws;
  draws.names = {"c0", "c1", "c2"};
  draws.draws.resize(4, 3);
  for (int s = 0; s < 4; ++s) draws.draws.row(s) << 1.0, 3.0, -4.0;
  draws.n_chains = 1;
  draws.n_warmup = 0;
  draws.n_iterations = 4;
  draws.chain = Eigen::VectorXi::Zero(4);
  draws.iteration = Eigen::VectorXi::LinSpaced(4, 0, 3);
  draws.divergent.assign(4, 0);
  draws.coef_cols = {0, 1, 2};
  draws.coef_labels = {0, 1, 2};
  const SobolReport report = sobol_indices(draws);

  const BasisPtr basis = make_basis({moments_uniform(-1, 1, 2, 0)}, 2);
  std::stringstream buffer;
  write_sobol_csv(buffer, report, basis.get());
  std::string line;
  std::getline(buffer, line);
  CHECK(line == "index,d1,mean,ci_low,ci_high,ci99_low,ci99_high");
  std::getline(buffer, line);
  CHECK(line.substr(0, 2) == "2,");  // highest index first
}

TEST_CASE("tabular CSV reader") {
  SECTION("well-formed file") {
    std::stringstream data("x1,x2,y\n0.1,0.2,1.5\n0.3,0.4,2.5\n");
    const TrainingSet loaded = read_tabular_csv(data);
    REQUIRE(loaded.inputs.rows() == 2);
    REQUIRE(loaded.inputs.cols() == 2);
    CHECK(loaded.inputs(1, 0) == 0.3);
    CHECK(loaded.y[1] == 2.5);
  }
  SECTION("ragged rows are rejected") {
    std::stringstream data("x1,y\n0.1,1.5\n0.3\n");
    CHECK_THROWS_AS(read_tabular_csv(data), ConfigError);
  }
  SECTION("non-numeric fields are rejected") {
    std::stringstream data("x1,y\n0.1,apple\n");
    CHECK_THROWS_AS(read_tabular_csv(data), ConfigError);
  }
}

TEST_CASE("experiment report serialization") {
  ExperimentReport report;
  report.problem = "ishigami";
  report.design = "sobol-sequence";
  report.degree = 10;
  report.t = 100;
  report.m = 286;
  MetricRow row;
  row.model = "projpred";
  row.t = 100;
  row.m = 26;
  row.mean_bias = -0.003;
  row.sd_bias = 0.002;
  row.rmse = 0.07;
  row.fit_seconds = 9.5;
  row.rhat_max = 1.004;
  row.divergences = 0;
  report.rows.push_back(row);
  MetricRow missing;
  missing.model = "reference";
  report.rows.push_back(missing);

  const json doc = experiment_to_json(report);
  CHECK(doc.at("rows").size() == 2);
  CHECK(doc.at("rows")[0].at("rmse") == 0.07);
  CHECK(doc.at("rows")[1].at("rmse").is_null());

  std::stringstream wide;
  write_experiment_csv_header(wide);
  write_experiment_csv_rows(wide, report);
  std::string line;
  std::getline(wide, line);
  CHECK(line ==
        "problem,design,degree,noise_sd,T,M,method,mean_bias,sd_bias,rmse,fit_seconds,"
        "rhat_max,divergences");
  std::getline(wide, line);
  CHECK(line.find("projpred") != std::string::npos);
  std::getline(wide, line);
  CHECK(line.find("nan") != std::string::npos);

  std::stringstream long_form;
  write_experiment_long_csv_header(long_form);
  write_experiment_long_csv_rows(long_form, report);
  int lines = 0;
  while (std::getline(long_form, line)) ++lines;
  CHECK(lines >= 7);  // header + six metrics for the complete row
}

TEST_CASE("json file helpers") {
  const std::string path = "test_io_tmp.json";
  json doc;
  doc["alpha"] = 0.1 + 0.2;  // exercises round-trip float formatting
  doc["name"] = "basis";
  write_json_file(path, doc);
  const json loaded = read_json_file(path);
  CHECK(loaded.at("alpha").get<double>() == doc.at("alpha").get<double>());
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_json_file("does_not_exist.json"), ConfigError);
}
