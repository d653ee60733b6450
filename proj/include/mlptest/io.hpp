#ifndef MLPTEST_IO_HPP_
#define MLPTEST_IO_HPP_

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mlptest/cost.hpp"
#include "mlptest/estimate.hpp"
#include "mlptest/hypothesis.hpp"
#include "mlptest/mlp.hpp"
#include "mlptest/simulate.hpp"

namespace mlptest {

using Json = nlohmann::ordered_json;

// Version of the report schemas written by this library.
inline constexpr const char *kReportSchemaVersion = "1.0";

// "%.17g"; enough digits to round-trip every double.
std::string format_double(double x);

// CSV with header z_1..z_{d'}, y_1..y_d. Throws ConfigInvalid with the
// offending line number on malformed input.
Dataset read_dataset_csv(const std::filesystem::path &path);
std::string dataset_to_csv(const Dataset &data);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path &path, const std::string &content);

Json to_json(const MLPArchitecture &arch);
MLPArchitecture architecture_from_json(const Json &j);

// {"architecture": {...}, "values": [...]}
Json to_json(const WeightVector &w);
WeightVector weights_from_json(const Json &j, const MLPArchitecture &arch);

// Boolean array of length s, true = free.
Json to_json(const ParameterMask &mask);
ParameterMask mask_from_json(const Json &j, const MLPArchitecture &arch);

Json to_json(const SymMatrix &m);
SymMatrix sym_matrix_from_json(const Json &j);

Json to_json(const FitResult &fit);
Json to_json(const TestReport &report);
Json to_json(const MonteCarloReport &report);

// Per-replication CSV: rep,t_n,s_n,converged_full,converged_restricted,
// cost_full,cost_restricted. Missing statistics are written as empty fields.
std::string replications_to_csv(const MonteCarloReport &report);
std::string qq_points_to_csv(const std::vector<QQPoint> &points);

GeneratorSpec generator_from_json(const Json &j, const MLPArchitecture &arch,
                                  std::uint64_t default_seed);
Json to_json(const GeneratorSpec &spec);

FitConfig fit_config_from_json(const Json &j);
Json to_json(const FitConfig &cfg);

// Fixed-width table: statistic, dof, p-value, decisions at 10/5/1%.
std::string render_test_table(const TestReport &report);

}  // namespace mlptest

#endif  // MLPTEST_IO_HPP_
