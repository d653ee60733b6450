#include "mlptest/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "mlptest/errors.hpp"

namespace mlptest {

void FitConfig::validate() const {
  if (max_iterations <= 0 || !(gradient_tolerance > 0.0) || n_starts < 0 ||
      !(box_radius > 0.0) || lbfgs_memory <= 0) {
    throw InvalidArgument("fit settings must be positive");
  }
  if (n_starts == 0 && initial_points.empty()) {
    throw InvalidArgument("fit needs at least one start");
  }
}

std::uint64_t start_seed(std::uint64_t base_seed, std::size_t start_index) {
  // splitmix64 of the pair, so nearby base seeds give unrelated streams.
  std::uint64_t z = base_seed * 0x9E3779B97F4A7C15ULL + start_index + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

double dot(const Vector &a, const Vector &b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double max_abs(const Vector &v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

struct Point {
  Vector x;
  double f = 0.0;
  Vector g;  // zero on pinned coordinates
};

class Descent {
 public:
  Descent(const Dataset &data, const ParameterMask &mask, const CostKind &cost,
          const FitConfig &cfg)
      : data_(data), mask_(mask), cost_(cost), cfg_(cfg), arch_(mask.arch()) {}

  // Throws SingularCovariance when x is not evaluable.
  Point evaluate(Vector x) const {
    WeightVector w(arch_, x, std::numeric_limits<double>::infinity());
    CostEvaluation e = evaluate_cost(cost_, w, data_, true);
    Point p{std::move(x), e.value, std::move(*e.gradient)};
    if (!std::isfinite(p.f)) throw SingularCovariance("non-finite cost");
    for (std::size_t k = 0; k < p.g.size(); ++k)
      if (!mask_.is_free(k)) p.g[k] = 0.0;
    return p;
  }

  // Gradient with components that push against an active bound removed.
  Vector projected_gradient(const Point &p) const {
    Vector pg = p.g;
    const double r = cfg_.box_radius;
    for (std::size_t k = 0; k < pg.size(); ++k) {
      if ((p.x[k] >= r && pg[k] < 0.0) || (p.x[k] <= -r && pg[k] > 0.0)) pg[k] = 0.0;
    }
    return pg;
  }

  Vector project(Vector x) const {
    const double r = cfg_.box_radius;
    for (std::size_t k = 0; k < x.size(); ++k) {
      x[k] = mask_.is_free(k) ? std::clamp(x[k], -r, r) : 0.0;
    }
    return x;
  }

  bool on_boundary(const Vector &x) const {
    for (std::size_t k = 0; k < x.size(); ++k)
      if (mask_.is_free(k) && std::abs(x[k]) >= cfg_.box_radius) return true;
    return false;
  }

  Vector direction(const Vector &pg) const {
    Vector q = pg;
    std::vector<double> alpha(s_.size());
    for (std::size_t i = s_.size(); i-- > 0;) {
      alpha[i] = rho_[i] * dot(s_[i], q);
      for (std::size_t k = 0; k < q.size(); ++k) q[k] -= alpha[i] * y_[i][k];
    }
    if (!s_.empty()) {
      const double gamma = dot(s_.back(), y_.back()) / dot(y_.back(), y_.back());
      for (double &v : q) v *= gamma;
    }
    for (std::size_t i = 0; i < s_.size(); ++i) {
      const double beta = rho_[i] * dot(y_[i], q);
      for (std::size_t k = 0; k < q.size(); ++k) q[k] += (alpha[i] - beta) * s_[i][k];
    }
    for (double &v : q) v = -v;
    return q;
  }

  void remember(const Point &from, const Point &to) {
    Vector s(from.x.size()), y(from.x.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      s[k] = to.x[k] - from.x[k];
      y[k] = to.g[k] - from.g[k];
    }
    const double sy = dot(s, y);
    if (!(sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y)))) return;
    s_.push_back(std::move(s));
    y_.push_back(std::move(y));
    rho_.push_back(1.0 / sy);
    if (s_.size() > static_cast<std::size_t>(cfg_.lbfgs_memory)) {
      s_.pop_front();
      y_.pop_front();
      rho_.pop_front();
    }
  }

  void forget() {
    s_.clear();
    y_.clear();
    rho_.clear();
  }

  bool has_memory() const { return !s_.empty(); }

  // -H^{-1} g over the coordinates that are free and not held at a bound,
  // or nullopt when that Hessian block is not positive definite.
  std::optional<Vector> newton_direction(const Point &p, const Vector &pg) const {
    WeightVector w(arch_, p.x, std::numeric_limits<double>::infinity());
    const CostEvaluation e = evaluate_cost(cost_, w, data_, true, true);
    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < pg.size(); ++k) {
      const bool held = std::abs(p.x[k]) >= cfg_.box_radius && pg[k] == 0.0;
      if (mask_.is_free(k) && !held) active.push_back(k);
    }
    if (active.empty()) return std::nullopt;
    SymMatrix h(active.size());
    Vector g(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      g[a] = pg[active[a]];
      for (std::size_t b = 0; b <= a; ++b) h.set(a, b, (*e.hessian)(active[a], active[b]));
    }
    try {
      const Vector step = cholesky(h).solve(g);
      Vector dir(pg.size(), 0.0);
      for (std::size_t a = 0; a < active.size(); ++a) dir[active[a]] = -step[a];
      return dir;
    } catch (const NotPositiveDefinite &) {
      return std::nullopt;
    }
  }

  // Backtracking along the projected path x(a) = P(x + a d). Returns the
  // accepted point, or nullopt when no sufficient decrease was found.
  std::optional<Point> line_search(const Point &cur, const Vector &dir, double step) const {
    constexpr double kArmijo = 1e-4;
    const double slope = dot(cur.g, dir);
    double prev_step = 0.0, prev_f = 0.0;
    bool have_prev = false;
    for (int trial = 0; trial < 60 && step > 1e-20; ++trial) {
      Vector x(cur.x.size());
      for (std::size_t k = 0; k < x.size(); ++k) x[k] = cur.x[k] + step * dir[k];
      x = project(std::move(x));
      std::optional<Point> cand;
      try {
        cand = evaluate(x);
      } catch (const SingularCovariance &) {
        have_prev = false;
        step *= 0.1;
        continue;
      }
      Vector dx(x.size());
      for (std::size_t k = 0; k < x.size(); ++k) dx[k] = x[k] - cur.x[k];
      const double predicted = dot(cur.g, dx);
      if (predicted < 0.0 && cand->f <= cur.f + kArmijo * predicted) return cand;
      if (predicted == 0.0) return std::nullopt;  // every free coordinate is at a bound

      double next;
      if (!have_prev) {
        next = -slope * step * step / (2.0 * (cand->f - cur.f - slope * step));
      } else {
        // Cubic through f(0), f'(0), f(step), f(prev_step).
        const double r1 = cand->f - cur.f - slope * step;
        const double r2 = prev_f - cur.f - slope * prev_step;
        const double denom = step - prev_step;
        const double a = (r1 / (step * step) - r2 / (prev_step * prev_step)) / denom;
        const double b =
            (-prev_step * r1 / (step * step) + step * r2 / (prev_step * prev_step)) / denom;
        if (a == 0.0) {
          next = -slope / (2.0 * b);
        } else {
          const double disc = b * b - 3.0 * a * slope;
          next = disc < 0.0 ? 0.5 * step : (-b + std::sqrt(disc)) / (3.0 * a);
        }
      }
      if (!std::isfinite(next)) next = 0.5 * step;
      next = std::clamp(next, 0.1 * step, 0.5 * step);
      prev_step = step;
      prev_f = cand->f;
      have_prev = true;
      step = next;
    }
    return std::nullopt;
  }

 private:
  const Dataset &data_;
  const ParameterMask &mask_;
  const CostKind &cost_;
  const FitConfig &cfg_;
  MLPArchitecture arch_;
  std::deque<Vector> s_, y_;
  std::deque<double> rho_;
};

}  // namespace

// Below this projected-gradient max-norm the exact Hessian is tried first.
constexpr double kNewtonSwitch = 1e-3;

DescentTrace descend(const Dataset &data, const ParameterMask &mask, const CostKind &cost,
                     const WeightVector &start, const FitConfig &cfg) {
  if (!(start.arch() == mask.arch())) throw ArchMismatch("start weights vs mask");
  Descent run(data, mask, cost, cfg);
  Point cur = run.evaluate(run.project(start.values()));

  DescentTrace trace;
  int iter = 0;
  bool converged = false;
  while (true) {
    const Vector pg = run.projected_gradient(cur);
    if (max_abs(pg) <= cfg.gradient_tolerance) {
      converged = true;
      break;
    }
    if (iter >= cfg.max_iterations) break;

    std::optional<Point> next;
    if (max_abs(pg) <= kNewtonSwitch) {
      if (const auto nd = run.newton_direction(cur, pg); nd && dot(*nd, pg) < 0.0) {
        next = run.line_search(cur, *nd, 1.0);
      }
    }
    Vector dir = run.direction(pg);
    if (dot(dir, pg) >= 0.0) {
      run.forget();
      dir = run.direction(pg);
    }
    const double step = run.has_memory() ? 1.0 : std::min(1.0, 1.0 / std::sqrt(dot(pg, pg)));
    if (!next) next = run.line_search(cur, dir, step);
    if (!next && run.has_memory()) {
      run.forget();
      dir = run.direction(pg);
      next = run.line_search(cur, dir, std::min(1.0, 1.0 / std::sqrt(dot(pg, pg))));
    }
    if (!next) break;
    run.remember(cur, *next);
    cur = std::move(*next);
    trace.accepted_costs.push_back(cur.f);
    ++iter;
  }

  trace.on_boundary = run.on_boundary(cur.x);
  trace.gradient_norm = max_abs(run.projected_gradient(cur));
  trace.converged = converged && !trace.on_boundary;
  trace.iterations = iter;
  trace.cost = cur.f;
  trace.weights = WeightVector(mask.arch(), cur.x, std::numeric_limits<double>::infinity());
  return trace;
}

FitResult minimize(const Dataset &data, const MLPArchitecture &arch, const ParameterMask &mask,
                   const FitConfig &cfg, const CostKind &cost) {
  cfg.validate();
  data.check_compatible(arch);
  data.check_fittable();
  if (!(mask.arch() == arch)) throw ArchMismatch("mask architecture differs from model");

  struct Candidate {
    StartSummary summary;
    std::optional<DescentTrace> trace;
    std::optional<WeightVector> canonical;
  };
  std::vector<Candidate> candidates;

  const std::size_t total = cfg.initial_points.size() + static_cast<std::size_t>(cfg.n_starts);
  for (std::size_t i = 0; i < total; ++i) {
    Candidate c;
    c.summary.index = i;
    WeightVector start;
    if (i < cfg.initial_points.size()) {
      c.summary.from_initial_point = true;
      start = apply_mask(cfg.initial_points[i], mask);
    } else {
      c.summary.seed = start_seed(cfg.seed, i - cfg.initial_points.size());
      start = random_init(arch, mask, c.summary.seed);
    }
    try {
      DescentTrace t = descend(data, mask, cost, start, cfg);
      c.summary.succeeded = true;
      c.summary.converged = t.converged;
      c.summary.cost = t.cost;
      c.summary.gradient_norm = t.gradient_norm;
      c.summary.iterations = t.iterations;
      if (!t.converged) {
        c.summary.failure = t.on_boundary ? "ended on the parameter box boundary"
                                          : "did not reach the gradient tolerance";
      }
      c.canonical = canonicalize(t.weights, mask);
      c.trace = std::move(t);
    } catch (const SingularCovariance &e) {
      c.summary.failure = e.what();
      c.summary.cost = std::numeric_limits<double>::quiet_NaN();
    }
    candidates.push_back(std::move(c));
  }

  // Duplicate detection on canonical optima.
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].canonical) continue;
    bool dup = false;
    for (std::size_t j = 0; j < i && !dup; ++j) {
      if (!candidates[j].canonical || candidates[j].summary.duplicate) continue;
      double diff = 0.0;
      for (std::size_t k = 0; k < arch.parameter_count(); ++k) {
        diff = std::max(diff,
                        std::abs((*candidates[i].canonical)[k] - (*candidates[j].canonical)[k]));
      }
      dup = diff <= 1e-4;
    }
    candidates[i].summary.duplicate = dup;
    if (!dup) ++distinct;
  }

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!candidates[i].trace) continue;
    if (!best || candidates[i].summary.cost < candidates[*best].summary.cost) best = i;
  }
  const bool any_converged =
      std::any_of(candidates.begin(), candidates.end(),
                  [](const Candidate &c) { return c.summary.converged; });
  if (!best || !any_converged) {
    std::string msg = "all " + std::to_string(candidates.size()) + " starts failed:";
    for (const auto &c : candidates) {
      msg += " [" + std::to_string(c.summary.index) + "] " +
             (c.summary.failure.empty() ? "unknown" : c.summary.failure) + ";";
    }
    throw AllStartsFailed(msg);
  }

  const Candidate &win = candidates[*best];
  FitResult out;
  out.arch = arch;
  out.mask = mask;
  out.cost_kind = cost.kind;
  out.weights = *win.canonical;
  out.cost = win.trace->cost;
  out.gradient_norm = win.trace->gradient_norm;
  out.converged = win.trace->converged;
  out.on_boundary = win.trace->on_boundary;
  out.iterations = win.trace->iterations;
  out.best_start = *best;
  out.distinct_minima = distinct;
  for (auto &c : candidates) out.starts.push_back(std::move(c.summary));
  if (cfg.compute_info_matrix) out.info_matrix = estimate_info_matrix(out.weights, data);
  return out;
}

SymMatrix estimate_info_matrix(const WeightVector &w, const Dataset &data) {
  const ResidualCovariance cov = gamma_n(w, data);
  const std::size_t s = w.size();
  const std::size_t d = data.output_dim();
  const Matrix &g_inv = cov.inverse.matrix();
  Matrix acc(s, s);
  for (std::size_t t = 0; t < data.size(); ++t) {
    const Matrix jac = weight_jacobian(w, data.inputs().row(t));
    const Matrix gj = g_inv * jac;
    for (std::size_t k = 0; k < s; ++k)
      for (std::size_t l = 0; l <= k; ++l) {
        double v = 0.0;
        for (std::size_t o = 0; o < d; ++o) v += jac(o, k) * gj(o, l);
        acc(k, l) += v;
      }
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  SymMatrix info(s);
  for (std::size_t k = 0; k < s; ++k)
    for (std::size_t l = 0; l <= k; ++l) info.set(k, l, acc(k, l) * inv_n);
  return info;
}

}  // namespace mlptest
