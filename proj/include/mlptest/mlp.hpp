#ifndef MLPTEST_MLP_HPP_
#define MLPTEST_MLP_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mlptest/linalg.hpp"

namespace mlptest {

inline constexpr double kDefaultBoxRadius = 50.0;

// One hidden layer of tanh units: F_W(z) = b2 + W2 tanh(W1 z + b1).
//
// Flat weight layout (s = h (d' + 1) + d (h + 1) coordinates):
//   [0, h d')                 W1, row-major by hidden unit
//   [h d', h (d' + 1))        b1
//   [h (d' + 1), .. + d h)    W2, row-major by output
//   [.., s)                   b2
struct MLPArchitecture {
  std::size_t input_dim = 1;
  std::size_t hidden_units = 1;
  std::size_t output_dim = 1;

  std::size_t parameter_count() const {
    return hidden_units * (input_dim + 1) + output_dim * (hidden_units + 1);
  }

  std::size_t hidden_weight(std::size_t unit, std::size_t input) const {
    return unit * input_dim + input;
  }
  std::size_t hidden_bias(std::size_t unit) const {
    return hidden_units * input_dim + unit;
  }
  std::size_t output_weight(std::size_t output, std::size_t unit) const {
    return hidden_units * (input_dim + 1) + output * hidden_units + unit;
  }
  std::size_t output_bias(std::size_t output) const {
    return hidden_units * (input_dim + 1) + output_dim * hidden_units + output;
  }

  void validate() const;

  friend bool operator==(const MLPArchitecture &, const MLPArchitecture &) = default;
};

class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(const MLPArchitecture &arch);
  WeightVector(const MLPArchitecture &arch, Vector values,
               double box_radius = kDefaultBoxRadius);

  const MLPArchitecture &arch() const { return arch_; }
  std::size_t size() const { return values_.size(); }
  const Vector &values() const { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }

  void set(std::size_t k, double v) { values_[k] = v; }

  friend bool operator==(const WeightVector &, const WeightVector &) = default;

 private:
  MLPArchitecture arch_;
  Vector values_;
};

class ParameterMask {
 public:
  ParameterMask() = default;
  // Every coordinate free.
  explicit ParameterMask(const MLPArchitecture &arch);
  ParameterMask(const MLPArchitecture &arch, std::vector<bool> free);

  static ParameterMask pinned(const MLPArchitecture &arch,
                              std::span<const std::size_t> pinned_indices);

  const MLPArchitecture &arch() const { return arch_; }
  const std::vector<bool> &free() const { return free_; }
  bool is_free(std::size_t k) const { return free_[k]; }
  std::size_t free_count() const;
  std::size_t pinned_count() const { return free_.size() - free_count(); }
  std::vector<std::size_t> free_indices() const;

  friend bool operator==(const ParameterMask &, const ParameterMask &) = default;

 private:
  MLPArchitecture arch_;
  std::vector<bool> free_;
};

// d x s matrix; column k is dF_W(z)/dW_k.
using WeightJacobian = Matrix;

struct HiddenActivations {
  Vector preactivation;  // W1 z + b1
  Vector activation;     // tanh of the above
};

HiddenActivations hidden_layer(const WeightVector &w, std::span<const double> z);

Vector forward(const WeightVector &w, std::span<const double> z);

WeightJacobian weight_jacobian(const WeightVector &w, std::span<const double> z);

// d-vector d^2 F_W(z) / dW_k dW_l.
Vector weight_second_derivative(const WeightVector &w, std::span<const double> z,
                                std::size_t k, std::size_t l);

// s x s matrix with entry (k, l) = v . d^2 F_W(z)/dW_k dW_l, built from the
// sparse structure of the second derivative.
Matrix contract_second_derivative(const WeightVector &w, std::span<const double> z,
                                  std::span<const double> v);

WeightVector apply_mask(const WeightVector &w, const ParameterMask &mask);

// Representative of the sign-flip / permutation class of w: each unit's first
// nonzero input-side coefficient is made positive, then units are sorted
// lexicographically by (input weights, bias).
WeightVector canonicalize(const WeightVector &w);

// Same rule, but units are only permuted among units whose mask pattern is
// identical, so the result still satisfies the mask.
WeightVector canonicalize(const WeightVector &w, const ParameterMask &mask);

// Applies the symmetry transform: new unit j is old unit perm[j], multiplied
// by sign[j] in all of its input weights, bias and outgoing weights.
WeightVector transform_units(const WeightVector &w, std::span<const std::size_t> perm,
                             std::span<const int> sign);

// Group image of w closest (Euclidean) to `reference`. Enumerates the whole
// group, so only meant for small h.
WeightVector align_to(const WeightVector &w, const WeightVector &reference);

WeightVector random_init(const MLPArchitecture &arch, const ParameterMask &mask,
                         std::uint64_t seed);

}  // namespace mlptest

#endif  // MLPTEST_MLP_HPP_
