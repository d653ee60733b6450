#include "mlptest/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <random>
#include <thread>

#include "mlptest/errors.hpp"

namespace mlptest {

const char *to_string(NoiseFamily f) {
  switch (f) {
    case NoiseFamily::kGaussian:
      return "gaussian";
    case NoiseFamily::kScaledUniform:
      return "scaled-uniform";
    case NoiseFamily::kScaledLaplace:
      return "scaled-laplace";
  }
  return "unknown";
}

NoiseFamily noise_family_from_string(const std::string &s) {
  if (s == "gaussian") return NoiseFamily::kGaussian;
  if (s == "scaled-uniform") return NoiseFamily::kScaledUniform;
  if (s == "scaled-laplace") return NoiseFamily::kScaledLaplace;
  throw InvalidArgument("unknown noise family '" + s + "'");
}

void GeneratorSpec::validate() const {
  arch.validate();
  if (!(true_weights.arch() == arch)) throw ArchMismatch("generator weights architecture");
  if (noise_cov.dim() != arch.output_dim) throw DimensionMismatch("noise covariance dimension");
  if (n == 0) throw InvalidArgument("generator sample size must be positive");
  if (input_law.kind == InputLawKind::kUniformBox && !(input_law.half_width > 0.0)) {
    throw InvalidArgument("uniform input box needs a positive half width");
  }
}

Dataset generate(const GeneratorSpec &spec) {
  spec.validate();
  CholeskyFactor factor = [&] {
    try {
      return cholesky(spec.noise_cov);
    } catch (const NotPositiveDefinite &e) {
      throw SingularCovariance(std::string("noise covariance: ") + e.what());
    }
  }();
  const Matrix &l = factor.lower();
  const auto &a = spec.arch;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit_uniform(-std::sqrt(3.0), std::sqrt(3.0));
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> box(-spec.input_law.half_width,
                                             spec.input_law.half_width);

  auto draw_noise = [&]() -> double {
    switch (spec.noise_family) {
      case NoiseFamily::kGaussian:
        return normal(rng);
      case NoiseFamily::kScaledUniform:
        return unit_uniform(rng);
      case NoiseFamily::kScaledLaplace: {
        // Laplace with scale 1/sqrt(2) has unit variance.
        const double e1 = expo(rng);
        const double e2 = expo(rng);
        return (e1 - e2) / std::sqrt(2.0);
      }
    }
    return 0.0;
  };

  Matrix inputs(spec.n, a.input_dim);
  Matrix targets(spec.n, a.output_dim);
  Vector u(a.output_dim);
  for (std::size_t t = 0; t < spec.n; ++t) {
    for (std::size_t i = 0; i < a.input_dim; ++i) {
      inputs(t, i) = spec.input_law.kind == InputLawKind::kStandardGaussian ? normal(rng)
                                                                           : box(rng);
    }
    for (auto &ui : u) ui = draw_noise();
    const Vector f = forward(spec.true_weights, inputs.row(t));
    for (std::size_t o = 0; o < a.output_dim; ++o) {
      double eps = 0.0;
      for (std::size_t k = 0; k <= o; ++k) eps += l(o, k) * u[k];
      targets(t, o) = f[o] + eps;
    }
  }
  return Dataset(std::move(inputs), std::move(targets));
}

double ks_critical_value(double coefficient, std::size_t m) {
  return coefficient / std::sqrt(static_cast<double>(m));
}

double ks_statistic(const std::vector<double> &sorted_samples,
                    const std::function<double(double)> &cdf) {
  if (sorted_samples.empty()) throw EmptyInput("ks_statistic needs samples");
  const double m = static_cast<double>(sorted_samples.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < sorted_samples.size(); ++i) {
    const double f = cdf(sorted_samples[i]);
    const double upper = static_cast<double>(i + 1) / m;
    const double lower = static_cast<double>(i) / m;
    sup = std::max({sup, std::abs(upper - f), std::abs(lower - f)});
  }
  return sup;
}

std::vector<QQPoint> qq_points(std::vector<double> samples, int dof, int grid) {
  if (samples.empty()) throw EmptyInput("qq_points needs samples");
  if (grid < 2) throw InvalidArgument("qq grid must be at least 2");
  std::sort(samples.begin(), samples.end());
  const double m = static_cast<double>(samples.size());
  std::vector<QQPoint> out;
  out.reserve(static_cast<std::size_t>(grid));
  for (int i = 1; i <= grid; ++i) {
    const double p = (i - 0.5) / grid;
    // Order statistic j (1-based) sits at (j - 0.5) / m.
    const double pos = std::clamp(m * p + 0.5, 1.0, m);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    const double empirical =
        lo >= samples.size() ? samples.back()
                             : samples[lo - 1] + frac * (samples[lo] - samples[lo - 1]);
    out.push_back({chi2_quantile(p, dof), empirical});
  }
  return out;
}

namespace {

double sorted_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

ReplicationRecord run_one(const GeneratorSpec &spec, const ParameterMask &restricted,
                          const FitConfig &cfg, std::size_t rep,
                          const MonteCarloOptions &options) {
  ReplicationRecord rec;
  rec.rep = rep;
  GeneratorSpec rep_spec = spec;
  rep_spec.seed = spec.seed + rep;
  rec.seed = rep_spec.seed;
  FitConfig rep_cfg = cfg;
  rep_cfg.seed = cfg.seed + rep;
  if (options.start_from_truth) rep_cfg.initial_points.push_back(spec.true_weights);

  try {
    const Dataset data = generate(rep_spec);
    TestReport report = run_test(data, spec.arch, restricted, rep_cfg, options.kinds);
    rec.ok = true;
    rec.converged_full = true;
    rec.converged_restricted = true;
    if (options.kinds.t) {
      rec.t_n = report.t_n;
      rec.converged_full = report.fit_full.converged;
      rec.converged_restricted = report.fit_restricted.converged;
      rec.cost_full = report.fit_full.cost;
      rec.cost_restricted = report.fit_restricted.cost;
      rec.weights_full = report.fit_full.weights;
      rec.weights_restricted = report.fit_restricted.weights;
      if (options.quadratic_form) {
        rec.quadratic_form = quadratic_form_statistic(data, report.fit_full.weights,
                                                      report.fit_restricted.weights);
      }
    }
    if (options.kinds.s) {
      rec.s_n = report.s_n;
      rec.converged_full = rec.converged_full && report.ls_fit_full->converged;
      rec.converged_restricted = rec.converged_restricted && report.ls_fit_restricted->converged;
      if (!options.kinds.t) {
        rec.cost_full = report.ls_fit_full->cost;
        rec.cost_restricted = report.ls_fit_restricted->cost;
        rec.weights_full = report.ls_fit_full->weights;
        rec.weights_restricted = report.ls_fit_restricted->weights;
      }
    }
    if (!rec.converged_full || !rec.converged_restricted) rec.failure = "not converged";
  } catch (const AllStartsFailed &) {
    rec.failure = "all starts failed";
  } catch (const InconsistentStatistic &) {
    rec.failure = "inconsistent nested fits";
  } catch (const Error &e) {
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace

MonteCarloReport aggregate(std::vector<ReplicationRecord> records, int dof, int qq_grid) {
  std::sort(records.begin(), records.end(),
            [](const ReplicationRecord &a, const ReplicationRecord &b) { return a.rep < b.rep; });
  MonteCarloReport report;
  report.replications = records.size();
  report.dof = dof;

  std::vector<double> t_values, s_values;
  std::map<std::string, std::size_t> reasons;
  for (const auto &r : records) {
    if (!r.usable()) {
      ++reasons[r.failure.empty() ? "unknown" : r.failure];
      continue;
    }
    ++report.usable;
    if (r.t_n) t_values.push_back(*r.t_n);
    if (r.s_n) s_values.push_back(*r.s_n);
  }
  report.failures = report.replications - report.usable;
  report.failure_fraction =
      report.replications ? static_cast<double>(report.failures) / report.replications : 1.0;
  report.valid = report.usable > 0 && report.failure_fraction <= kMaxFailureFraction;
  report.failure_reasons.assign(reasons.begin(), reasons.end());

  const auto cdf = [dof](double x) { return chi2_cdf(std::max(x, 0.0), dof); };
  if (!t_values.empty()) {
    std::sort(t_values.begin(), t_values.end());
    report.empirical_mean_t = sorted_mean(t_values);
    report.ks_t_vs_chi2 = ks_statistic(t_values, cdf);
    report.qq_t = qq_points(t_values, dof, qq_grid);
  }
  if (!s_values.empty()) {
    std::sort(s_values.begin(), s_values.end());
    report.empirical_mean_s = sorted_mean(s_values);
    report.ks_s_vs_chi2 = ks_statistic(s_values, cdf);
  }
  const std::size_t m = std::max(t_values.size(), s_values.size());
  if (m > 0) report.ks_critical_01 = ks_critical_value(kKsCoefficient01, m);
  report.records = std::move(records);
  return report;
}

MonteCarloReport run_replications(const GeneratorSpec &spec, const ParameterMask &restricted,
                                  const FitConfig &cfg, std::size_t reps,
                                  const MonteCarloOptions &options) {
  if (reps == 0) throw InvalidArgument("need at least one replication");
  spec.validate();
  cfg.validate();
  if (!(restricted.arch() == spec.arch)) throw ArchMismatch("restricted mask architecture");

  std::vector<ReplicationRecord> records(reps);
  const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(reps)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      records[r] = run_one(spec, restricted, cfg, r, options);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  return aggregate(std::move(records), static_cast<int>(restricted.pinned_count()),
                   options.qq_grid);
}

double contrast_probe(const GeneratorSpec &spec, const WeightVector &w, std::size_t n_large) {
  if (n_large < 10000) throw InvalidArgument("contrast_probe needs n_large >= 10^4");
  GeneratorSpec big = spec;
  big.n = n_large;
  const Dataset data = generate(big);
  return u_n(w, data) - u_n(spec.true_weights, data);
}

}  // namespace mlptest
