#include "mlptest/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "mlptest/errors.hpp"

namespace mlptest {

void MLPArchitecture::validate() const {
  if (input_dim == 0 || hidden_units == 0 || output_dim == 0) {
    throw InvalidArgument("architecture dimensions must be positive");
  }
}

WeightVector::WeightVector(const MLPArchitecture &arch)
    : arch_(arch), values_(arch.parameter_count(), 0.0) {
  arch.validate();
}

WeightVector::WeightVector(const MLPArchitecture &arch, Vector values, double box_radius)
    : arch_(arch), values_(std::move(values)) {
  arch.validate();
  if (values_.size() != arch.parameter_count()) {
    throw DimensionMismatch("weight vector has " + std::to_string(values_.size()) +
                            " entries, architecture needs " +
                            std::to_string(arch.parameter_count()));
  }
  for (double v : values_) {
    if (!std::isfinite(v) || std::abs(v) > box_radius) {
      throw InvalidArgument("weight outside the parameter box");
    }
  }
}

ParameterMask::ParameterMask(const MLPArchitecture &arch)
    : arch_(arch), free_(arch.parameter_count(), true) {
  arch.validate();
}

ParameterMask::ParameterMask(const MLPArchitecture &arch, std::vector<bool> free)
    : arch_(arch), free_(std::move(free)) {
  arch.validate();
  if (free_.size() != arch.parameter_count()) {
    throw DimensionMismatch("mask length does not match parameter count");
  }
  if (free_count() == 0) throw InvalidArgument("mask must leave at least one free weight");
}

ParameterMask ParameterMask::pinned(const MLPArchitecture &arch,
                                    std::span<const std::size_t> pinned_indices) {
  std::vector<bool> free(arch.parameter_count(), true);
  for (std::size_t k : pinned_indices) {
    if (k >= free.size()) throw InvalidArgument("pinned index out of range");
    free[k] = false;
  }
  return ParameterMask(arch, std::move(free));
}

std::size_t ParameterMask::free_count() const {
  return static_cast<std::size_t>(std::count(free_.begin(), free_.end(), true));
}

std::vector<std::size_t> ParameterMask::free_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < free_.size(); ++k)
    if (free_[k]) idx.push_back(k);
  return idx;
}

namespace {

enum class Role { kHiddenWeight, kHiddenBias, kOutputWeight, kOutputBias };

struct Coordinate {
  Role role;
  std::size_t unit = 0;
  std::size_t input = 0;
  std::size_t output = 0;
};

Coordinate classify(const MLPArchitecture &a, std::size_t k) {
  const std::size_t n_w1 = a.hidden_units * a.input_dim;
  const std::size_t n_hidden = a.hidden_units * (a.input_dim + 1);
  const std::size_t n_w2 = a.output_dim * a.hidden_units;
  if (k < n_w1) return {Role::kHiddenWeight, k / a.input_dim, k % a.input_dim, 0};
  if (k < n_hidden) return {Role::kHiddenBias, k - n_w1, 0, 0};
  if (k < n_hidden + n_w2) {
    const std::size_t r = k - n_hidden;
    return {Role::kOutputWeight, r % a.hidden_units, 0, r / a.hidden_units};
  }
  if (k < a.parameter_count()) return {Role::kOutputBias, 0, 0, k - n_hidden - n_w2};
  throw InvalidArgument("weight index out of range");
}

void check_input(const WeightVector &w, std::span<const double> z) {
  if (z.size() != w.arch().input_dim) throw DimensionMismatch("input dimension");
}

// Multiplier of the input-side coordinate c in the hidden unit's
// preactivation: z_i for a weight, 1 for the bias.
double input_factor(const Coordinate &c, std::span<const double> z) {
  return c.role == Role::kHiddenWeight ? z[c.input] : 1.0;
}

bool is_input_side(const Coordinate &c) {
  return c.role == Role::kHiddenWeight || c.role == Role::kHiddenBias;
}

}  // namespace

HiddenActivations hidden_layer(const WeightVector &w, std::span<const double> z) {
  check_input(w, z);
  const auto &a = w.arch();
  HiddenActivations h{Vector(a.hidden_units), Vector(a.hidden_units)};
  for (std::size_t j = 0; j < a.hidden_units; ++j) {
    double pre = w[a.hidden_bias(j)];
    for (std::size_t i = 0; i < a.input_dim; ++i) pre += w[a.hidden_weight(j, i)] * z[i];
    h.preactivation[j] = pre;
    h.activation[j] = std::tanh(pre);
  }
  return h;
}

Vector forward(const WeightVector &w, std::span<const double> z) {
  const auto &a = w.arch();
  const auto h = hidden_layer(w, z);
  Vector out(a.output_dim);
  for (std::size_t o = 0; o < a.output_dim; ++o) {
    double acc = w[a.output_bias(o)];
    for (std::size_t j = 0; j < a.hidden_units; ++j)
      acc += w[a.output_weight(o, j)] * h.activation[j];
    out[o] = acc;
  }
  return out;
}

WeightJacobian weight_jacobian(const WeightVector &w, std::span<const double> z) {
  const auto &a = w.arch();
  const auto h = hidden_layer(w, z);
  Matrix jac(a.output_dim, a.parameter_count());
  for (std::size_t j = 0; j < a.hidden_units; ++j) {
    const double act = h.activation[j];
    const double slope = 1.0 - act * act;
    for (std::size_t o = 0; o < a.output_dim; ++o) {
      const double g = w[a.output_weight(o, j)] * slope;
      for (std::size_t i = 0; i < a.input_dim; ++i) jac(o, a.hidden_weight(j, i)) = g * z[i];
      jac(o, a.hidden_bias(j)) = g;
      jac(o, a.output_weight(o, j)) = act;
    }
  }
  for (std::size_t o = 0; o < a.output_dim; ++o) jac(o, a.output_bias(o)) = 1.0;
  return jac;
}

Vector weight_second_derivative(const WeightVector &w, std::span<const double> z,
                                std::size_t k, std::size_t l) {
  const auto &a = w.arch();
  Coordinate ck = classify(a, k);
  Coordinate cl = classify(a, l);
  Vector out(a.output_dim, 0.0);
  if (!is_input_side(ck)) std::swap(ck, cl);
  if (!is_input_side(ck)) return out;  // F is affine in the output-side weights.

  const auto h = hidden_layer(w, z);
  const double act = h.activation[ck.unit];
  const double slope = 1.0 - act * act;
  const double curvature = -2.0 * act * slope;

  if (is_input_side(cl)) {
    if (cl.unit != ck.unit) return out;
    const double f = curvature * input_factor(ck, z) * input_factor(cl, z);
    for (std::size_t o = 0; o < a.output_dim; ++o)
      out[o] = w[a.output_weight(o, ck.unit)] * f;
    return out;
  }
  if (cl.role == Role::kOutputWeight && cl.unit == ck.unit) {
    out[cl.output] = slope * input_factor(ck, z);
  }
  return out;
}

Matrix contract_second_derivative(const WeightVector &w, std::span<const double> z,
                                  std::span<const double> v) {
  const auto &a = w.arch();
  if (v.size() != a.output_dim) throw DimensionMismatch("contraction vector");
  const auto h = hidden_layer(w, z);
  Matrix m(a.parameter_count(), a.parameter_count());
  for (std::size_t j = 0; j < a.hidden_units; ++j) {
    const double act = h.activation[j];
    const double slope = 1.0 - act * act;
    const double curvature = -2.0 * act * slope;
    double back = 0.0;
    for (std::size_t o = 0; o < a.output_dim; ++o) back += v[o] * w[a.output_weight(o, j)];
    const double uc = back * curvature;

    // Input-side block of unit j; factor 1 stands for the bias.
    const std::size_t n_in = a.input_dim + 1;
    for (std::size_t p = 0; p < n_in; ++p) {
      const std::size_t kp = p < a.input_dim ? a.hidden_weight(j, p) : a.hidden_bias(j);
      const double fp = p < a.input_dim ? z[p] : 1.0;
      for (std::size_t q = 0; q <= p; ++q) {
        const std::size_t kq = q < a.input_dim ? a.hidden_weight(j, q) : a.hidden_bias(j);
        const double fq = q < a.input_dim ? z[q] : 1.0;
        const double val = uc * fp * fq;
        m(kp, kq) = val;
        m(kq, kp) = val;
      }
      for (std::size_t o = 0; o < a.output_dim; ++o) {
        const std::size_t ko = a.output_weight(o, j);
        const double val = v[o] * slope * fp;
        m(kp, ko) = val;
        m(ko, kp) = val;
      }
    }
  }
  return m;
}

WeightVector apply_mask(const WeightVector &w, const ParameterMask &mask) {
  if (!(w.arch() == mask.arch())) throw ArchMismatch("mask architecture differs from weights");
  WeightVector out = w;
  for (std::size_t k = 0; k < w.size(); ++k)
    if (!mask.is_free(k)) out.set(k, 0.0);
  return out;
}

namespace {

std::vector<std::size_t> unit_coordinates(const MLPArchitecture &a, std::size_t j) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < a.input_dim; ++i) idx.push_back(a.hidden_weight(j, i));
  idx.push_back(a.hidden_bias(j));
  for (std::size_t o = 0; o < a.output_dim; ++o) idx.push_back(a.output_weight(o, j));
  return idx;
}

Vector input_side_key(const WeightVector &w, std::size_t j) {
  const auto &a = w.arch();
  Vector key;
  for (std::size_t i = 0; i < a.input_dim; ++i) key.push_back(w[a.hidden_weight(j, i)]);
  key.push_back(w[a.hidden_bias(j)]);
  return key;
}

std::vector<int> canonical_signs(const WeightVector &w) {
  const auto &a = w.arch();
  std::vector<int> sign(a.hidden_units, 1);
  for (std::size_t j = 0; j < a.hidden_units; ++j) {
    for (double c : input_side_key(w, j)) {
      if (c != 0.0) {
        sign[j] = c < 0.0 ? -1 : 1;
        break;
      }
    }
  }
  return sign;
}

WeightVector flip_signs(const WeightVector &w) {
  std::vector<std::size_t> identity(w.arch().hidden_units);
  std::iota(identity.begin(), identity.end(), 0);
  return transform_units(w, identity, canonical_signs(w));
}

// Sorts the units listed in `slots` by input-side key and writes them back
// into those slots in ascending order.
void sort_units_within(const WeightVector &w, const std::vector<std::size_t> &slots,
                       std::vector<std::size_t> &perm) {
  std::vector<std::size_t> order = slots;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return input_side_key(w, x) < input_side_key(w, y);
  });
  for (std::size_t i = 0; i < slots.size(); ++i) perm[slots[i]] = order[i];
}

}  // namespace

WeightVector transform_units(const WeightVector &w, std::span<const std::size_t> perm,
                             std::span<const int> sign) {
  const auto &a = w.arch();
  if (perm.size() != a.hidden_units || sign.size() != a.hidden_units) {
    throw DimensionMismatch("unit transform size");
  }
  WeightVector out = w;
  for (std::size_t j = 0; j < a.hidden_units; ++j) {
    const auto dst = unit_coordinates(a, j);
    const auto src = unit_coordinates(a, perm[j]);
    for (std::size_t c = 0; c < dst.size(); ++c) {
      out.set(dst[c], sign[j] < 0 ? -w[src[c]] : w[src[c]]);
    }
  }
  return out;
}

WeightVector canonicalize(const WeightVector &w) {
  const WeightVector flipped = flip_signs(w);
  const auto &a = w.arch();
  std::vector<std::size_t> slots(a.hidden_units);
  std::iota(slots.begin(), slots.end(), 0);
  std::vector<std::size_t> perm(a.hidden_units);
  sort_units_within(flipped, slots, perm);
  const std::vector<int> plus(a.hidden_units, 1);
  return transform_units(flipped, perm, plus);
}

WeightVector canonicalize(const WeightVector &w, const ParameterMask &mask) {
  if (!(w.arch() == mask.arch())) throw ArchMismatch("mask architecture differs from weights");
  const WeightVector flipped = flip_signs(w);
  const auto &a = w.arch();
  std::vector<std::vector<bool>> patterns(a.hidden_units);
  for (std::size_t j = 0; j < a.hidden_units; ++j)
    for (std::size_t k : unit_coordinates(a, j)) patterns[j].push_back(mask.is_free(k));

  std::vector<std::size_t> perm(a.hidden_units);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<bool> done(a.hidden_units, false);
  for (std::size_t j = 0; j < a.hidden_units; ++j) {
    if (done[j]) continue;
    std::vector<std::size_t> group;
    for (std::size_t k = j; k < a.hidden_units; ++k) {
      if (!done[k] && patterns[k] == patterns[j]) {
        group.push_back(k);
        done[k] = true;
      }
    }
    sort_units_within(flipped, group, perm);
  }
  const std::vector<int> plus(a.hidden_units, 1);
  return transform_units(flipped, perm, plus);
}

WeightVector align_to(const WeightVector &w, const WeightVector &reference) {
  const auto &a = w.arch();
  if (!(a == reference.arch())) throw ArchMismatch("align_to architecture mismatch");
  const std::size_t h = a.hidden_units;
  std::vector<std::size_t> perm(h);
  std::iota(perm.begin(), perm.end(), 0);
  WeightVector best = w;
  double best_dist = std::numeric_limits<double>::infinity();
  std::vector<int> sign(h);
  do {
    for (std::size_t bits = 0; bits < (std::size_t{1} << h); ++bits) {
      for (std::size_t j = 0; j < h; ++j) sign[j] = (bits >> j) & 1 ? -1 : 1;
      const WeightVector cand = transform_units(w, perm, sign);
      double dist = 0.0;
      for (std::size_t k = 0; k < cand.size(); ++k) {
        const double diff = cand[k] - reference[k];
        dist += diff * diff;
      }
      if (dist < best_dist) {
        best_dist = dist;
        best = cand;
      }
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

WeightVector random_init(const MLPArchitecture &arch, const ParameterMask &mask,
                         std::uint64_t seed) {
  if (!(arch == mask.arch())) throw ArchMismatch("mask architecture differs");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-0.7, 0.7);
  WeightVector w(arch);
  for (std::size_t k = 0; k < w.size(); ++k)
    if (mask.is_free(k)) w.set(k, unif(rng));
  return w;
}

}  // namespace mlptest
