#ifndef MLPTEST_SIMULATE_HPP_
#define MLPTEST_SIMULATE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mlptest/cost.hpp"
#include "mlptest/estimate.hpp"
#include "mlptest/hypothesis.hpp"
#include "mlptest/linalg.hpp"
#include "mlptest/mlp.hpp"

namespace mlptest {

enum class NoiseFamily { kGaussian, kScaledUniform, kScaledLaplace };
enum class InputLawKind { kStandardGaussian, kUniformBox };

const char *to_string(NoiseFamily f);
NoiseFamily noise_family_from_string(const std::string &s);

struct InputLaw {
  InputLawKind kind = InputLawKind::kStandardGaussian;
  double half_width = 1.0;  // uniform on [-a, a]^d' for kUniformBox
};

// Y_t = F_{W0}(Z_t) + L u_t with L L^T = noise_cov and u_t i.i.d.
// standardized (zero mean, unit variance) components.
struct GeneratorSpec {
  MLPArchitecture arch;
  WeightVector true_weights;
  SymMatrix noise_cov;
  NoiseFamily noise_family = NoiseFamily::kGaussian;
  InputLaw input_law;
  std::size_t n = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

Dataset generate(const GeneratorSpec &spec);

// KS critical values c(alpha) / sqrt(m) for alpha = 10%, 5%, 1%.
inline constexpr double kKsCoefficient10 = 1.224;
inline constexpr double kKsCoefficient05 = 1.358;
inline constexpr double kKsCoefficient01 = 1.628;
double ks_critical_value(double coefficient, std::size_t m);

// sup_i max(|i/m - cdf(x_i)|, |(i-1)/m - cdf(x_i)|) over ascending samples.
double ks_statistic(const std::vector<double> &sorted_samples,
                    const std::function<double(double)> &cdf);

struct QQPoint {
  double theoretical = 0.0;
  double empirical = 0.0;
};

// Pairs at p_i = (i - 0.5) / grid; the empirical quantile interpolates the
// order statistics placed at (j - 0.5) / m.
std::vector<QQPoint> qq_points(std::vector<double> samples, int dof, int grid);

struct ReplicationRecord {
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  std::optional<double> t_n;
  std::optional<double> s_n;
  std::optional<double> quadratic_form;
  bool converged_full = false;
  bool converged_restricted = false;
  double cost_full = 0.0;
  double cost_restricted = 0.0;
  std::optional<WeightVector> weights_full;
  std::optional<WeightVector> weights_restricted;

  bool usable() const { return ok && converged_full && converged_restricted; }
};

struct MonteCarloOptions {
  StatisticKinds kinds;
  int qq_grid = 20;
  int threads = 1;
  // Adds the generator weights (masked) as a start for every fit.
  bool start_from_truth = true;
  bool quadratic_form = false;
};

struct MonteCarloReport {
  std::size_t replications = 0;
  int dof = 0;
  std::vector<ReplicationRecord> records;
  std::size_t usable = 0;
  std::size_t failures = 0;
  double failure_fraction = 0.0;
  bool valid = false;  // failure fraction <= 5%
  std::vector<std::pair<std::string, std::size_t>> failure_reasons;

  std::optional<double> empirical_mean_t;
  std::optional<double> ks_t_vs_chi2;
  std::optional<double> empirical_mean_s;
  std::optional<double> ks_s_vs_chi2;
  std::vector<QQPoint> qq_t;
  double ks_critical_01 = 0.0;
};

inline constexpr double kMaxFailureFraction = 0.05;

// Replication r uses generator seed spec.seed + r and fit seed cfg.seed + r.
MonteCarloReport run_replications(const GeneratorSpec &spec, const ParameterMask &restricted,
                                  const FitConfig &cfg, std::size_t reps,
                                  const MonteCarloOptions &options = {});

// Builds the aggregate fields from per-replication records. Sums run over
// sorted values so the result does not depend on record order.
MonteCarloReport aggregate(std::vector<ReplicationRecord> records, int dof, int qq_grid);

// u_n(w) - u_n(W0) on one dataset of size n_large drawn from spec.
double contrast_probe(const GeneratorSpec &spec, const WeightVector &w, std::size_t n_large);

}  // namespace mlptest

#endif  // MLPTEST_SIMULATE_HPP_
