#ifndef MLPTEST_CLI_HPP_
#define MLPTEST_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "mlptest/cost.hpp"
#include "mlptest/estimate.hpp"
#include "mlptest/hypothesis.hpp"
#include "mlptest/io.hpp"
#include "mlptest/simulate.hpp"

namespace mlptest::cli {

enum class Command { kFit, kTest, kSimulate, kGradcheck };

enum ExitCode : int { kOk = 0, kValidationError = 1, kNumericalFailure = 2 };

// Command-line values; each one present replaces the matching config field.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> reps;
  bool quiet = false;
};

struct SimulateSettings {
  std::size_t reps = 100;
  StatisticKinds kinds;
  int qq_grid = 20;
  int threads = 1;
  bool quadratic_form = false;
};

struct GradcheckSettings {
  int configurations = 5;
  double step = 1e-5;
  double gradient_tolerance = 1e-5;
  double hessian_tolerance = 1e-4;
};

struct RunConfig {
  Command command = Command::kFit;
  MLPArchitecture arch;
  std::optional<std::filesystem::path> dataset_path;
  std::optional<GeneratorSpec> generator;
  std::optional<ParameterMask> mask;
  FitConfig fit;
  CostKind::Kind cost = CostKind::Kind::kLogDet;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  SimulateSettings simulate;
  GradcheckSettings gradcheck;
  bool quiet = false;

  // Fully resolved settings, embedded in every report.
  Json resolved() const;
};

Command command_from_string(const std::string &s);

// Parses and validates the config document. Relative dataset paths are
// resolved against `base_dir`. Throws ConfigInvalid.
RunConfig parse_run_config(Command command, const Json &doc,
                           const std::filesystem::path &base_dir, const Overrides &overrides);

RunConfig load_run_config(Command command, const std::filesystem::path &config_path,
                          const Overrides &overrides);

// Executes a validated config. Returns the process exit status.
int run(const RunConfig &config, std::ostream &out, std::ostream &err);

// Full entry point: argument parsing, config loading, execution.
int main_entry(int argc, char **argv, std::ostream &out, std::ostream &err);

}  // namespace mlptest::cli

#endif  // MLPTEST_CLI_HPP_
