#ifndef MLPTEST_ESTIMATE_HPP_
#define MLPTEST_ESTIMATE_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlptest/cost.hpp"
#include "mlptest/linalg.hpp"
#include "mlptest/mlp.hpp"

namespace mlptest {

struct FitConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-7;  // on the max-norm of the free gradient
  int n_starts = 10;
  std::uint64_t seed = 0;
  double box_radius = kDefaultBoxRadius;
  int lbfgs_memory = 10;
  bool compute_info_matrix = false;
  // Extra starting points tried before the random ones (masked on entry).
  std::vector<WeightVector> initial_points;

  void validate() const;
};

struct StartSummary {
  std::size_t index = 0;
  std::uint64_t seed = 0;  // 0 for user-supplied initial points
  bool from_initial_point = false;
  bool succeeded = false;
  bool converged = false;
  bool duplicate = false;  // same canonical optimum as an earlier start
  double cost = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  std::string failure;
};

struct FitResult {
  MLPArchitecture arch;
  ParameterMask mask;
  CostKind::Kind cost_kind = CostKind::Kind::kLogDet;
  WeightVector weights;  // canonical representative
  double cost = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  bool on_boundary = false;
  int iterations = 0;
  std::size_t best_start = 0;
  std::size_t distinct_minima = 0;
  std::vector<StartSummary> starts;
  std::optional<SymMatrix> info_matrix;
};

// Result of a single quasi-Newton run from one starting point.
struct DescentTrace {
  WeightVector weights;
  double cost = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  bool on_boundary = false;
  int iterations = 0;
  std::vector<double> accepted_costs;  // cost after every accepted step
};

// L-BFGS with backtracking (quadratic then cubic interpolation) and
// projection onto the box, over the free coordinates only. Throws
// SingularCovariance if the start itself is not evaluable.
DescentTrace descend(const Dataset &data, const ParameterMask &mask, const CostKind &cost,
                     const WeightVector &start, const FitConfig &cfg);

// Multi-start minimization. Throws AllStartsFailed when no start converges.
FitResult minimize(const Dataset &data, const MLPArchitecture &arch, const ParameterMask &mask,
                   const FitConfig &cfg, const CostKind &cost = CostKind::logdet());

// Plug-in estimate of I_0: entry (k, l) = tr(Gamma_n^{-1}(w) B_n(W_k, W_l)).
SymMatrix estimate_info_matrix(const WeightVector &w, const Dataset &data);

std::uint64_t start_seed(std::uint64_t base_seed, std::size_t start_index);

}  // namespace mlptest

#endif  // MLPTEST_ESTIMATE_HPP_
