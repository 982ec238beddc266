#include "cdnlb/dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cdnlb/cost.hpp"

namespace cdnlb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Ogita-Rump-Oishi Dot2. With nonnegative terms the compensated sum is
// within a few n*u^2 of the exact value, so the final rounding is the
// correct one except in vanishingly rare near-tie cases.
double dot2_row(const Matrix& c, Index i, const Vector& mu) {
  double s = 0.0;
  double err = 0.0;
  for (Index j = 0; j < c.cols(); ++j) {
    const double a = mu(j);
    const double b = c(i, j);
    const double p = a * b;
    const double pe = std::fma(a, b, -p);
    const double t = s + p;
    const double z = t - s;
    const double se = (s - (t - z)) + (p - z);
    s = t;
    err += se + pe;
  }
  return s + err;
}

}  // namespace

DualState cold_start(const SystemInstance& instance) {
  DualState st;
  st.mu = Vector::Zero(instance.size());
  return st;
}

Vector beta_projection(const CorrelationMatrix& c, const Vector& mu) {
  if (mu.size() != c.size()) {
    throw Error(ErrorCode::DimensionMismatch, "mu has " + std::to_string(mu.size()) +
                                                  " entries, expected " + std::to_string(c.size()));
  }
  Vector beta(c.size());
  for (Index i = 0; i < c.size(); ++i) beta(i) = dot2_row(c.matrix(), i, mu);
  return beta;
}

PrimalResponse solve_subproblems(const SystemInstance& instance, const Vector& mu,
                                 const Vector& beta) {
  const Index n = instance.size();
  const CostParams& k = instance.costs();
  PrimalResponse r{Vector(n), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    r.x(i) = solve_sub_x(k.node(i), instance.arrivals()(i), beta(i));
    r.s(i) = solve_sub_S(k.eta(i), instance.capacities()(i), mu(i));
  }
  return r;
}

Vector project_dual(const Vector& mu, double alpha, const Vector& s_obs, const Vector& s) {
  Vector out(mu.size());
  for (Index i = 0; i < mu.size(); ++i) out(i) = dual_update(mu(i), alpha, s_obs(i), s(i));
  return out;
}

DualState dual_step(const DualState& state, double alpha, const SystemInstance& instance) {
  const Vector beta = beta_projection(instance.correlation(), state.mu);
  PrimalResponse r = solve_subproblems(instance, state.mu, beta);
  DualState next;
  next.s_obs = load_map(instance.correlation(), instance.arrivals(), r.x);
  next.mu = project_dual(state.mu, alpha, next.s_obs, r.s);
  next.x = std::move(r.x);
  next.s = std::move(r.s);
  next.k = state.k + 1;
  return next;
}

double supergradient_norm_bound(double a_max, double t_max, Index n) {
  return a_max * a_max + static_cast<double>(n) * t_max * t_max;
}

double step_size(double epsilon, double a_max, double t_max, Index n) {
  if (!(epsilon > 0.0) || !(a_max > 0.0) || !(t_max > 0.0) || n <= 0) {
    throw Error(ErrorCode::NonPositiveInput, "step_size needs epsilon, A_max, T_max, N > 0");
  }
  return 2.0 * epsilon / supergradient_norm_bound(a_max, t_max, n);
}

StepSizePolicy StepSizePolicy::constant(double alpha) {
  if (!(alpha > 0.0)) throw Error(ErrorCode::NonPositiveInput, "alpha must be positive", -1, -1, alpha);
  return {alpha, Schedule::Constant};
}

StepSizePolicy StepSizePolicy::for_epsilon(double epsilon, const SystemInstance& instance) {
  // A_max = 0 would make every step size admissible; the capacity term alone
  // still gives a finite, positive alpha.
  const double a_max = instance.total_arrival();
  const double t_max = instance.max_capacity();
  if (!(epsilon > 0.0)) throw Error(ErrorCode::NonPositiveInput, "epsilon must be positive", -1, -1, epsilon);
  return constant(2.0 * epsilon / supergradient_norm_bound(a_max, t_max, instance.size()));
}

StepSizePolicy StepSizePolicy::diminishing(double alpha0) {
  StepSizePolicy p = constant(alpha0);
  p.schedule = Schedule::Diminishing;
  return p;
}

double StepSizePolicy::at(long k) const {
  if (schedule == Schedule::Constant) return alpha;
  return alpha / std::sqrt(static_cast<double>(k) + 1.0);
}

double dual_objective(const SystemInstance& instance, const Vector& mu, const Vector& x,
                      const Vector& s, const Vector& s_obs) {
  const CostParams& k = instance.costs();
  double d = 0.0;
  for (Index i = 0; i < instance.size(); ++i) {
    // S* < T always holds for the subproblem minimizer, so g is finite.
    d += proxy_cost(k.eta(i), instance.capacities()(i), s(i)) +
         offload_cost(k.node(i), instance.arrivals()(i), x(i)) + mu(i) * (s_obs(i) - s(i));
  }
  return d;
}

ConvergenceTracker::ConvergenceTracker(const SystemInstance& instance, const DualOptions& options)
    : instance_(instance), options_(options) {
  report_.norm_bound =
      supergradient_norm_bound(instance.total_arrival(), instance.max_capacity(), instance.size());
}

bool ConvergenceTracker::observe(const Vector& mu_before, const DualState& after) {
  const long k = after.k - 1;
  const double cost = total_cost(instance_, after.x, after.s_obs);
  const double dual = dual_objective(instance_, mu_before, after.x, after.s, after.s_obs);
  const double g2 = (after.s_obs - after.s).squaredNorm();

  report_.grad_norms_sq.push_back(g2);
  if (g2 > report_.norm_bound) ++report_.bound_violations;
  if (cost < report_.best_cost) {
    report_.best_cost = cost;
    report_.best_x = after.x;
    report_.best_k = k;
  }
  report_.best_dual = std::max(report_.best_dual, dual);
  report_.iterations = after.k;

  if (options_.record_stride > 0 && k % options_.record_stride == 0) {
    report_.trajectory.push_back({k, cost, dual, std::sqrt(g2), mu_before, after.x, after.s, after.s_obs});
  }

  if (after.mu == mu_before) {
    report_.converged = true;
    return true;
  }
  best_history_.push_back(report_.best_cost);
  if (options_.stop_tol > 0.0 && options_.window > 0 &&
      static_cast<long>(best_history_.size()) > options_.window) {
    const double then = best_history_[best_history_.size() - 1 - static_cast<std::size_t>(options_.window)];
    if (std::isfinite(report_.best_cost) && then - report_.best_cost < options_.stop_tol) {
      report_.converged = true;
      return true;
    }
  }
  return false;
}

ConvergenceReport ConvergenceTracker::finish(DualState final_state) && {
  report_.final_state = std::move(final_state);
  return std::move(report_);
}

ConvergenceReport run_dual(const SystemInstance& instance, const StepSizePolicy& policy,
                           const DualOptions& options) {
  ConvergenceTracker tracker(instance, options);
  DualState state = cold_start(instance);
  for (long k = 0; k < options.max_iters; ++k) {
    DualState next = dual_step(state, policy.at(k), instance);
    const bool stop = tracker.observe(state.mu, next);
    state = std::move(next);
    if (stop) break;
  }
  return std::move(tracker).finish(std::move(state));
}

namespace {

ReferenceOptimum grid_optimum(const SystemInstance& inst, double tol) {
  const Index n = inst.size();
  const long m = std::lround(1.0 / tol);
  if (m < 1) throw Error(ErrorCode::NonPositiveInput, "grid tolerance must be in (0, 1]", -1, -1, tol);
  const Matrix b = inst.load_matrix();
  const CostParams& k = inst.costs();
  const Vector& t = inst.capacities();

  auto level = [m](long i) { return static_cast<double>(i) / static_cast<double>(m); };

  std::vector<std::vector<double>> h(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    h[j].resize(static_cast<std::size_t>(m + 1));
    for (long i = 0; i <= m; ++i) h[j][i] = offload_cost(k.node(j), inst.arrivals()(j), level(i));
  }

  const Index last = n - 1;
  std::vector<long> idx(static_cast<std::size_t>(last), 0);
  Vector partial(n);
  double best = kInf;
  std::vector<long> best_idx;

  auto line_cost = [&](long i, double outer_h) {
    const double v = level(i);
    double w = outer_h + h[last][i];
    for (Index r = 0; r < n; ++r) {
      const double s = partial(r) + b(r, last) * v;
      if (s >= t(r)) return kInf;
      w += proxy_cost(k.eta(r), t(r), s);
    }
    return w;
  };

  while (true) {
    partial.setZero();
    double outer_h = 0.0;
    for (Index j = 0; j < last; ++j) {
      partial += b.col(j) * level(idx[j]);
      outer_h += h[j][idx[j]];
    }

    // The line cost is convex in the last index and +inf on a suffix, so a
    // discrete ternary search narrows to a short bracket holding the lowest
    // minimizing index; a scan of the bracket finishes it.
    long lo = 0;
    long hi = m;
    while (hi - lo > 2) {
      const long m1 = lo + (hi - lo) / 3;
      const long m2 = hi - (hi - lo) / 3;
      if (line_cost(m1, outer_h) <= line_cost(m2, outer_h)) {
        hi = m2;
      } else {
        lo = m1 + 1;
      }
    }
    long arg = lo;
    double val = line_cost(lo, outer_h);
    for (long i = lo + 1; i <= hi; ++i) {
      const double v = line_cost(i, outer_h);
      if (v < val) {
        val = v;
        arg = i;
      }
    }
    if (val < best) {
      best = val;
      best_idx = idx;
      best_idx.push_back(arg);
    }

    Index p = last - 1;
    while (p >= 0 && idx[p] == m) idx[p--] = 0;
    if (p < 0) break;
    ++idx[p];
  }

  if (!std::isfinite(best)) throw Error(ErrorCode::InfeasibleEverywhere, "no grid point has finite cost");
  ReferenceOptimum out{ControlVector(n), best};
  for (Index j = 0; j < n; ++j) out.x(j) = level(best_idx[j]);
  return out;
}

Vector cost_gradient(const SystemInstance& inst, const Matrix& b, const ControlVector& x) {
  const Vector s = b * x;
  const CostParams& k = inst.costs();
  Vector gs(inst.size());
  for (Index i = 0; i < inst.size(); ++i) gs(i) = proxy_cost_derivative(k.eta(i), inst.capacities()(i), s(i));
  Vector g = b.transpose() * gs;
  for (Index j = 0; j < inst.size(); ++j) g(j) += offload_cost_derivative(k.node(j), inst.arrivals()(j), x(j));
  return g;
}

ReferenceOptimum gradient_optimum(const SystemInstance& inst, double tol) {
  const Index n = inst.size();
  const Matrix b = inst.load_matrix();
  ControlVector x = ControlVector::Zero(n);
  double w = operating_cost(inst, x);
  double step = 1.0;
  for (int it = 0; it < 100000; ++it) {
    const Vector g = cost_gradient(inst, b, x);
    bool moved = false;
    // Armijo backtracking along the projection arc; infeasible trials are
    // rejected by their infinite cost.
    for (int ls = 0; ls < 60; ++ls) {
      const ControlVector y = (x - step * g).cwiseMax(0.0).cwiseMin(1.0);
      const double wy = operating_cost(inst, y);
      if (wy <= w - 1e-4 * g.dot(x - y)) {
        const double change = (y - x).lpNorm<Eigen::Infinity>();
        x = y;
        moved = change > 0.0;
        const double drop = w - wy;
        w = wy;
        step *= 2.0;
        if (change < tol && drop < tol * tol) return {x, w};
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return {x, w};
}

}  // namespace

ReferenceOptimum reference_optimum(const SystemInstance& instance, double tol, OracleMode mode) {
  if (!(tol > 0.0)) throw Error(ErrorCode::NonPositiveInput, "tol must be positive", -1, -1, tol);
  if (mode == OracleMode::Grid) return grid_optimum(instance, tol);
  return gradient_optimum(instance, tol);
}

}  // namespace cdnlb
