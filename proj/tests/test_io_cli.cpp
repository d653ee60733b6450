#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mlptest/cli.hpp"
#include "mlptest/errors.hpp"
#include "mlptest/io.hpp"

namespace mlptest {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("mlptest_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path &p, const std::string &s) {
  std::ofstream(p) << s;
}

std::string read_text(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mlptest");
  std::vector<char *> argv;
  for (auto &a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::main_entry(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path config_path(const std::string &name) {
  return fs::path(MLPTEST_SOURCE_DIR) / "configs" / name;
}

TEST(FormatDouble, RoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789}) {
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(DatasetCsv, ParsesAndRoundTrips) {
  const fs::path dir = fresh_dir("csv_ok");
  write_text(dir / "d.csv", "z_1,z_2,y_1\n0.5,-1,2.25\n1e-3,3,4\n");
  const Dataset d = read_dataset_csv(dir / "d.csv");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.input_dim(), 2u);
  EXPECT_EQ(d.output_dim(), 1u);
  EXPECT_EQ(d.inputs()(1, 0), 1e-3);
  EXPECT_EQ(d.targets()(0, 0), 2.25);

  write_text(dir / "back.csv", dataset_to_csv(d));
  const Dataset e = read_dataset_csv(dir / "back.csv");
  EXPECT_EQ(d.inputs(), e.inputs());
  EXPECT_EQ(d.targets(), e.targets());
}

TEST(DatasetCsv, ReportsLineNumbers) {
  const fs::path dir = fresh_dir("csv_bad");
  const auto message = [&](const std::string &content) {
    write_text(dir / "bad.csv", content);
    try {
      read_dataset_csv(dir / "bad.csv");
    } catch (const ConfigInvalid &e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("a,b\n1,2\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("z_1,y_1\n1,2\n3,abc\n").find("line 3"), std::string::npos);
  EXPECT_NE(message("z_1,y_1\n1,2,3\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("z_1,y_1\n").find("no data"), std::string::npos);
  EXPECT_THROW(read_dataset_csv(dir / "missing.csv"), ConfigInvalid);
}

TEST(Json, RoundTrips) {
  const MLPArchitecture a{2, 2, 1};
  EXPECT_EQ(architecture_from_json(to_json(a)), a);

  const WeightVector w(a, Vector{0.1, -0.2, 0.3, 0.4, 0.5, 0.6, -0.7, 0.8, 0.9});
  EXPECT_EQ(weights_from_json(to_json(w), a), w);
  EXPECT_EQ(weights_from_json(Json(w.values()), a), w);
  EXPECT_THROW(weights_from_json(Json(Vector{1.0}), a), ConfigInvalid);

  std::vector<bool> free(a.parameter_count(), true);
  free[3] = false;
  const ParameterMask m(a, free);
  EXPECT_EQ(mask_from_json(to_json(m), a).free_indices(), m.free_indices());

  const SymMatrix s{{1.0, 0.25}, {0.25, 3.0}};
  EXPECT_EQ(sym_matrix_from_json(to_json(s)), s);

  FitConfig cfg;
  cfg.n_starts = 3;
  cfg.gradient_tolerance = 1e-6;
  const FitConfig back = fit_config_from_json(to_json(cfg));
  EXPECT_EQ(back.n_starts, 3);
  EXPECT_EQ(back.gradient_tolerance, 1e-6);

  GeneratorSpec g;
  g.arch = a;
  g.true_weights = w;
  g.noise_cov = SymMatrix{{2.0}};
  g.noise_family = NoiseFamily::kScaledLaplace;
  g.input_law = InputLaw{InputLawKind::kUniformBox, 1.5};
  g.n = 77;
  g.seed = 5;
  const GeneratorSpec h = generator_from_json(to_json(g), a, 0);
  EXPECT_EQ(h.true_weights, g.true_weights);
  EXPECT_EQ(h.noise_family, g.noise_family);
  EXPECT_EQ(h.input_law.half_width, 1.5);
  EXPECT_EQ(h.n, 77u);
  EXPECT_EQ(h.seed, 5u);
}

TEST(WriteFileAtomic, LeavesOnlyTarget) {
  const fs::path dir = fresh_dir("atomic");
  write_file_atomic(dir / "a.txt", "hello");
  write_file_atomic(dir / "a.txt", "world");
  EXPECT_EQ(read_text(dir / "a.txt"), "world");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator()), 1);
}

TEST(Cli, GradcheckOnBundledToyConfig) {
  const fs::path out = fresh_dir("cli_gradcheck");
  const CliRun r = run_cli({"gradcheck", "--config", config_path("gradcheck_toy.json").string(),
                            "--out", out.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const Json doc = Json::parse(read_text(out / "gradcheck.json"));
  EXPECT_TRUE(doc["gradcheck"]["pass"].get<bool>());
  for (const auto &row : doc["gradcheck"]["configurations"])
    EXPECT_LT(row["gradient_relative_error"].get<double>(), 1e-5);
  EXPECT_EQ(doc["spec_version"], kReportSchemaVersion);
  EXPECT_EQ(doc["command"], "gradcheck");
}

TEST(Cli, TestOnBundledNullConfig) {
  const fs::path out = fresh_dir("cli_test");
  const CliRun r = run_cli(
      {"test", "--config", config_path("test_h0.json").string(), "--out", out.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  const Json doc = Json::parse(read_text(out / "test_report.json"));
  const double p = doc["test_report"]["p_value_t"].get<double>();
  EXPECT_GE(p, 0.0);
  EXPECT_LE(p, 1.0);
  EXPECT_EQ(doc["test_report"]["dof"].get<int>(), 2);
  EXPECT_NE(r.out.find("T_n"), std::string::npos);
  EXPECT_NE(r.out.find("S_n"), std::string::npos);
}

TEST(Cli, MissingDatasetIsValidationErrorWithoutOutputs) {
  const fs::path dir = fresh_dir("cli_missing");
  write_text(dir / "cfg.json", R"({
    "architecture": {"input_dim": 1, "hidden_units": 1, "output_dim": 1},
    "dataset": "nowhere.csv",
    "out": "results"
  })");
  const CliRun r = run_cli({"fit", "--config", (dir / "cfg.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nowhere.csv"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "results"));
  EXPECT_FALSE(fs::exists("results"));
}

TEST(Cli, FitFromCsvDataset) {
  const fs::path dir = fresh_dir("cli_fit");
  GeneratorSpec g;
  g.arch = MLPArchitecture{1, 1, 1};
  g.true_weights = WeightVector(g.arch, Vector{1.0, 0.2, 1.5, -0.3});
  g.noise_cov = SymMatrix{{0.04}};
  g.n = 300;
  g.seed = 3;
  write_text(dir / "data.csv", dataset_to_csv(generate(g)));
  write_text(dir / "cfg.json", R"({
    "architecture": {"input_dim": 1, "hidden_units": 1, "output_dim": 1},
    "dataset": "data.csv",
    "fit": {"n_starts": 3, "compute_info_matrix": true}
  })");
  const CliRun r = run_cli({"fit", "--config", (dir / "cfg.json").string(), "--out",
                            (dir / "out").string(), "--quiet"});
  EXPECT_EQ(r.code, 0) << r.err;
  const Json doc = Json::parse(read_text(dir / "out" / "fit_result.json"));
  const Json &fit = doc["fit_result"];
  EXPECT_TRUE(fit["converged"].get<bool>());
  EXPECT_EQ(fit["weights"].size(), 4u);
  EXPECT_TRUE(fit.contains("info_matrix"));
  EXPECT_NEAR(fit["weights"][2].get<double>(), 1.5, 0.2);
}

TEST(Cli, ValidationErrors) {
  const fs::path dir = fresh_dir("cli_invalid");
  EXPECT_EQ(run_cli({"fit"}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate", "--config", "x.json"}).code, 1);
  EXPECT_EQ(run_cli({"fit", "--config", (dir / "absent.json").string()}).code, 1);

  write_text(dir / "both.json", R"({
    "architecture": {"input_dim": 1, "hidden_units": 1, "output_dim": 1},
    "dataset": "a.csv",
    "generator": {"true_weights": [0, 0, 0, 0], "noise_cov": [[1]], "n": 10}
  })");
  EXPECT_EQ(run_cli({"fit", "--config", (dir / "both.json").string()}).code, 1);

  write_text(dir / "nomask.json", R"({
    "architecture": {"input_dim": 1, "hidden_units": 1, "output_dim": 1},
    "generator": {"true_weights": [0, 0, 0, 0], "noise_cov": [[1]], "n": 10}
  })");
  const CliRun r = run_cli({"test", "--config", (dir / "nomask.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("mask"), std::string::npos);
}

TEST(Cli, NumericalFailureExitCode) {
  const fs::path dir = fresh_dir("cli_numerical");
  // Collinear targets make the residual covariance singular everywhere.
  write_text(dir / "data.csv", "z_1,y_1,y_2\n0,1,2\n1,2,4\n2,3,6\n3,4,8\n");
  write_text(dir / "cfg.json", R"({
    "architecture": {"input_dim": 1, "hidden_units": 1, "output_dim": 2},
    "dataset": "data.csv",
    "fit": {"n_starts": 2}
  })");
  const CliRun r = run_cli(
      {"fit", "--config", (dir / "cfg.json").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(dir / "out" / "fit_result.json"));
}

TEST(Cli, SimulateIsByteIdenticalAcrossRuns) {
  const fs::path a = fresh_dir("cli_sim");
  const std::string cfg = config_path("simulate_h0.json").string();
  const char *files[] = {"monte_carlo_report.json", "replications.csv", "qq_points.csv"};
  const CliRun ra = run_cli({"simulate", "--config", cfg, "--reps", "4", "--out", a.string()});
  ASSERT_EQ(ra.code, 0) << ra.err;
  std::vector<std::string> first;
  for (const char *f : files) first.push_back(read_text(a / f));
  const CliRun rb = run_cli({"simulate", "--config", cfg, "--reps", "4", "--out", a.string()});
  ASSERT_EQ(rb.code, 0) << rb.err;
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(read_text(a / files[i]), first[i]) << files[i];
  const std::string csv = read_text(a / "replications.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "rep,t_n,s_n,converged_full,converged_restricted,cost_full,cost_restricted");
}

TEST(Cli, SeedOverrideChangesResults) {
  const fs::path a = fresh_dir("cli_seed_a"), b = fresh_dir("cli_seed_b");
  const std::string cfg = config_path("simulate_h0.json").string();
  run_cli({"simulate", "--config", cfg, "--reps", "2", "--out", a.string()});
  run_cli({"simulate", "--config", cfg, "--reps", "2", "--seed", "99", "--out", b.string()});
  EXPECT_NE(read_text(a / "replications.csv"), read_text(b / "replications.csv"));
  const Json doc = Json::parse(read_text(b / "monte_carlo_report.json"));
  EXPECT_EQ(doc["config"]["seed"].get<int>(), 99);
}

TEST(Cli, InstalledBinaryRuns) {
  const fs::path out = fresh_dir("cli_binary");
  const std::string cmd = std::string(MLPTEST_CLI_PATH) + " gradcheck --quiet --config " +
                          config_path("gradcheck_toy.json").string() + " --out " +
                          out.string() + " > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(out / "gradcheck.json"));
}

}  // namespace
}  // namespace mlptest
