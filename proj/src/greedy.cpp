#include "cdnlb/greedy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cdnlb {

namespace {

void check_size(const SystemInstance& inst, const Vector& x) {
  if (x.size() != inst.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                "state has " + std::to_string(x.size()) + " entries, expected " + std::to_string(inst.size()));
  }
}

// Bound on ||J||_inf over the unit hypercube: x(1-x) <= 1/4 and
// |S_i - T_i| <= max(T_i, rowsum_i(B) - T_i).
double lipschitz_bound(const Matrix& ct, const Vector& a, const Vector& t, double beta_sens) {
  double l = 0.0;
  for (Index i = 0; i < ct.rows(); ++i) {
    double row = 0.0;
    for (Index j = 0; j < ct.cols(); ++j) row += ct(i, j) * a(j);
    l = std::max(l, 0.25 * row + std::max(t(i), row - t(i)));
  }
  return beta_sens * l;
}

// Largest real step for which RK4 stays inside its stability region, with
// margin for complex eigenvalues.
constexpr double kStableStep = 2.0;

struct Rhs {
  const Matrix& ct;
  const Vector& t;
  double beta_sens;

  Vector load(const Vector& a, const Vector& x) const { return ct * a.cwiseProduct(x); }

  Vector operator()(const Vector& a, const Vector& x) const {
    const Vector s = load(a, x);
    Vector f(x.size());
    for (Index i = 0; i < x.size(); ++i) f(i) = -beta_sens * x(i) * (1.0 - x(i)) * (s(i) - t(i));
    return f;
  }
};

Trajectory run_ode(const SystemInstance& inst, const OdeConfig& cfg, const ControlVector& x0,
                   const ArrivalSchedule* schedule) {
  validate(cfg);
  check_size(inst, x0);
  for (Index i = 0; i < x0.size(); ++i) {
    if (!(x0(i) > 0.0 && x0(i) < 1.0)) {
      throw Error(ErrorCode::BadInitialPoint, "x0 must lie strictly inside the unit hypercube", i, -1, x0(i));
    }
  }

  const Matrix ct = inst.correlation().matrix().transpose();
  const Vector& t = inst.capacities();
  const Rhs rhs{ct, t, cfg.beta_sens};
  const double lo = cfg.clamp_eps;
  const double hi = 1.0 - cfg.clamp_eps;

  auto arrivals_at = [&](double time) -> Vector {
    if (!schedule) return inst.arrivals();
    Vector a = (*schedule)(time);
    if (a.size() != inst.size()) throw Error(ErrorCode::DimensionMismatch, "schedule returned wrong length");
    return a;
  };

  const long steps = static_cast<long>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  const long stride = std::max(1L, cfg.record_stride);
  Trajectory tr;
  tr.clamp_eps = cfg.clamp_eps;

  Vector x = x0;
  Vector a = arrivals_at(0.0);
  Vector f = rhs(a, x);
  double time = 0.0;
  auto record = [&] {
    tr.t.push_back(time);
    tr.x.push_back(x);
    tr.s.push_back(rhs.load(a, x));
  };
  record();

  long substeps = std::max(1L, static_cast<long>(std::ceil(cfg.dt * lipschitz_bound(ct, a, t, cfg.beta_sens) / kStableStep)));
  bool last_recorded = true;
  for (long k = 0; k < steps; ++k) {
    if (!schedule && f.lpNorm<Eigen::Infinity>() < cfg.steady_tol) {
      tr.converged = true;
      break;
    }
    const double t0 = static_cast<double>(k) * cfg.dt;
    if (schedule) {
      substeps = std::max(1L, static_cast<long>(std::ceil(cfg.dt * lipschitz_bound(ct, a, t, cfg.beta_sens) / kStableStep)));
    }
    const double h = cfg.dt / static_cast<double>(substeps);
    for (long m = 0; m < substeps; ++m) {
      const double ts = t0 + static_cast<double>(m) * h;
      const Vector a_mid = schedule ? arrivals_at(ts + 0.5 * h) : a;
      const Vector a_end = schedule ? arrivals_at(ts + h) : a;
      const Vector& a_start = a;
      const Vector k1 = rhs(a_start, x);
      const Vector k2 = rhs(a_mid, x + 0.5 * h * k1);
      const Vector k3 = rhs(a_mid, x + 0.5 * h * k2);
      const Vector k4 = rhs(a_end, x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      x = x.cwiseMax(lo).cwiseMin(hi);
      if (schedule) a = a_end;
    }
    time = static_cast<double>(k + 1) * cfg.dt;
    f = rhs(a, x);
    last_recorded = (k + 1) % stride == 0;
    if (last_recorded) record();
  }
  if (!last_recorded) record();
  tr.residual = f.lpNorm<Eigen::Infinity>();
  if (!schedule && tr.residual < cfg.steady_tol) tr.converged = true;
  return tr;
}

bool is_interior(const Vector& y, double margin) {
  return (y.array() > margin).all() && (y.array() < 1.0 - margin).all();
}

// Solves S_F = T_F for the free nodes with the others pinned at 0 or 1.
// pattern: 0 -> x = 0, 1 -> x = 1, 2 -> free.
bool solve_pattern(const Matrix& b, const Vector& t, const std::vector<int>& pattern, Vector& x) {
  const Index n = b.rows();
  std::vector<Index> free;
  x = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (pattern[i] == 1) x(i) = 1.0;
    if (pattern[i] == 2) free.push_back(i);
  }
  if (free.empty()) return true;
  const Index f = static_cast<Index>(free.size());
  Matrix m(f, f);
  Vector rhs(f);
  for (Index r = 0; r < f; ++r) {
    rhs(r) = t(free[r]);
    for (Index j = 0; j < n; ++j) {
      if (pattern[j] == 1) rhs(r) -= b(free[r], j);
    }
    for (Index c = 0; c < f; ++c) m(r, c) = b(free[r], free[c]);
  }
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible()) return false;
  const Vector y = lu.solve(rhs);
  if (!y.allFinite() || !is_interior(y, 1e-9)) return false;
  for (Index r = 0; r < f; ++r) x(free[r]) = y(r);
  return true;
}

void add_unique(std::vector<FixedPointReport>& out, FixedPointReport r) {
  for (const auto& p : out) {
    if ((p.x - r.x).lpNorm<Eigen::Infinity>() < 1e-9) return;
  }
  out.push_back(std::move(r));
}

}  // namespace

void validate(const OdeConfig& c) {
  if (!(c.dt > 0.0) || !(c.horizon > 0.0) || !(c.steady_tol > 0.0) || !(c.beta_sens > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "dt, horizon, steady_tol and beta_sens must be positive");
  }
  if (!(c.clamp_eps > 0.0 && c.clamp_eps < 1e-6)) {
    throw Error(ErrorCode::InvalidConfig, "clamp_eps must lie in (0, 1e-6)", -1, -1, c.clamp_eps);
  }
}

Vector vector_field(const SystemInstance& inst, double beta_sens, const ControlVector& x) {
  check_size(inst, x);
  const LoadVector s = load_map(inst.correlation(), inst.arrivals(), x);
  Vector f(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    f(i) = -beta_sens * x(i) * (1.0 - x(i)) * (s(i) - inst.capacities()(i));
  }
  return f;
}

Trajectory integrate(const SystemInstance& instance, const OdeConfig& config, const ControlVector& x0) {
  return run_ode(instance, config, x0, nullptr);
}

Trajectory integrate_forced(const SystemInstance& instance, const OdeConfig& config,
                            const ControlVector& x0, const ArrivalSchedule& arrivals) {
  return run_ode(instance, config, x0, &arrivals);
}

Matrix jacobian(const SystemInstance& inst, double beta_sens, const ControlVector& x) {
  check_size(inst, x);
  const Matrix b = inst.load_matrix();
  const LoadVector s = load_map(inst.correlation(), inst.arrivals(), x);
  const Index n = inst.size();
  Matrix j(n, n);
  for (Index r = 0; r < n; ++r) {
    const double damp = x(r) * (1.0 - x(r));
    for (Index c = 0; c < n; ++c) j(r, c) = -beta_sens * damp * b(r, c);
    j(r, r) = -beta_sens * (damp * b(r, r) + (1.0 - 2.0 * x(r)) * (s(r) - inst.capacities()(r)));
  }
  return j;
}

std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
  using C = std::complex<double>;
  if (m.rows() != m.cols()) throw Error(ErrorCode::NonSquare, "eigenvalues of a non-square matrix");
  const Index n = m.rows();
  if (n == 0) return {};
  if (n == 1) return {C(m(0, 0), 0.0)};
  if (n == 2) {
    const double half_tr = 0.5 * (m(0, 0) + m(1, 1));
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = half_tr * half_tr - det;
    if (disc >= 0.0) {
      const double r = std::sqrt(disc);
      return {C(half_tr - r, 0.0), C(half_tr + r, 0.0)};
    }
    const double im = std::sqrt(-disc);
    return {C(half_tr, -im), C(half_tr, im)};
  }
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NotConverged, "eigenvalue iteration failed");
  std::vector<C> out(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::sort(out.begin(), out.end(), [](const C& a, const C& b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
  });
  return out;
}

std::string to_string(FixedPointClass c) {
  switch (c) {
    case FixedPointClass::Stable: return "stable";
    case FixedPointClass::Unstable: return "unstable";
    case FixedPointClass::Marginal: return "marginal";
  }
  return "?";
}

FixedPointReport classify_fixed_point(const SystemInstance& inst, const ControlVector& x, double beta_sens) {
  FixedPointReport r;
  r.x = x;
  r.residual = vector_field(inst, beta_sens, x).lpNorm<Eigen::Infinity>();
  if (!(r.residual < 1e-8)) {
    throw Error(ErrorCode::NotAFixedPoint, "||F(x)|| = " + std::to_string(r.residual), -1, -1, r.residual);
  }
  r.s = load_map(inst.correlation(), inst.arrivals(), x);
  r.eigenvalues = eigenvalues(jacobian(inst, beta_sens, x));
  bool all_negative = true;
  bool any_positive = false;
  for (const auto& l : r.eigenvalues) {
    if (!(l.real() < -1e-9)) all_negative = false;
    if (l.real() > 1e-9) any_positive = true;
  }
  r.classification = any_positive    ? FixedPointClass::Unstable
                     : all_negative ? FixedPointClass::Stable
                                    : FixedPointClass::Marginal;
  return r;
}

std::vector<FixedPointReport> find_fixed_points(const SystemInstance& inst, double beta_sens,
                                                const OdeConfig& config) {
  const Index n = inst.size();
  const Matrix b = inst.load_matrix();
  const Vector& t = inst.capacities();
  std::vector<FixedPointReport> out;

  auto try_point = [&](const Vector& x) {
    try {
      add_unique(out, classify_fixed_point(inst, x, beta_sens));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NotAFixedPoint) throw;
    }
  };

  if (n <= kEnumerateLimit) {
    std::vector<int> pattern(static_cast<std::size_t>(n), 0);
    Vector x;
    while (true) {
      if (solve_pattern(b, t, pattern, x)) try_point(x);
      Index p = 0;
      while (p < n && pattern[p] == 2) pattern[p++] = 0;
      if (p == n) break;
      ++pattern[p];
    }
    return out;
  }

  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int start = 0; start < 9; ++start) {
    Vector x0(n);
    for (Index i = 0; i < n; ++i) x0(i) = start == 0 ? 0.5 : u(rng);
    const Trajectory tr = integrate(inst, config, x0);
    const Vector& end = tr.final_x();
    std::vector<int> pattern(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) pattern[i] = end(i) < 1e-6 ? 0 : end(i) > 1.0 - 1e-6 ? 1 : 2;
    Vector x;
    if (solve_pattern(b, t, pattern, x)) {
      try_point(x);
    } else {
      Vector snapped = end;
      for (Index i = 0; i < n; ++i) {
        if (pattern[i] != 2) snapped(i) = pattern[i];
      }
      try_point(snapped);
    }
  }
  return out;
}

std::vector<bool> stability_polytope_check(const SystemInstance& inst) {
  const Matrix& c = inst.correlation().matrix();
  const Vector& a = inst.arrivals();
  std::vector<bool> pass(static_cast<std::size_t>(inst.size()));
  for (Index i = 0; i < inst.size(); ++i) {
    double inflow = 0.0;
    for (Index j = 0; j < inst.size(); ++j) {
      if (j != i) inflow += c(j, i) * a(j);
    }
    pass[i] = inflow <= inst.capacities()(i);
  }
  return pass;
}

StabilityVerdict analyze_stability(const SystemInstance& inst, double beta_sens, double x_tol, double s_tol) {
  StabilityVerdict v;
  v.in_polytope = stability_polytope_check(inst);
  v.all_in_polytope = std::all_of(v.in_polytope.begin(), v.in_polytope.end(), [](bool b) { return b; });
  v.fixed_points = find_fixed_points(inst, beta_sens);
  v.uncontrollably_overloaded.assign(static_cast<std::size_t>(inst.size()), false);
  for (const auto& fp : v.fixed_points) {
    if (fp.classification != FixedPointClass::Stable) continue;
    for (Index i = 0; i < inst.size(); ++i) {
      if (fp.x(i) < x_tol && fp.s(i) > inst.capacities()(i) + s_tol) v.uncontrollably_overloaded[i] = true;
    }
  }
  v.locally_controllable = std::none_of(v.uncontrollably_overloaded.begin(), v.uncontrollably_overloaded.end(),
                                        [](bool b) { return b; });
  return v;
}

std::string to_string(TwoNodeVerdict v) {
  switch (v) {
    case TwoNodeVerdict::ControllableForAllA: return "controllable-for-all-A";
    case TwoNodeVerdict::ControllableSufficient: return "controllable-sufficient";
    case TwoNodeVerdict::IndeterminateByTheorem: return "indeterminate-by-theorem";
  }
  return "?";
}

SystemInstance two_node_instance(double alpha, double beta, std::array<double, 2> arrivals,
                                 std::array<double, 2> capacities) {
  Matrix c(2, 2);
  c << alpha, 1.0 - alpha, 1.0 - beta, beta;
  return SystemInstance(validate_correlation(c), Vector{{arrivals[0], arrivals[1]}},
                        Vector{{capacities[0], capacities[1]}}, CostParams::uniform(2, NodeCosts{}));
}

TwoNodeReport two_node_classify(double alpha, double beta, std::array<double, 2> a, std::array<double, 2> t) {
  for (double p : {alpha, beta}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::OutOfRange, "self-correlation outside [0, 1]", -1, -1, p);
  }
  for (double v : {a[0], a[1], t[0], t[1]}) {
    if (!(v > 0.0)) throw Error(ErrorCode::OutOfRange, "arrivals and capacities must be positive", -1, -1, v);
  }
  TwoNodeReport r;
  if (alpha > 0.5 && beta > 0.5) {
    r.verdict = TwoNodeVerdict::ControllableForAllA;
    return r;
  }
  if (alpha < 0.5 && beta < 0.5 && a[0] < t[0] / (1.0 - alpha) && a[1] < t[1] / (1.0 - beta)) {
    r.verdict = TwoNodeVerdict::ControllableSufficient;
    return r;
  }
  r.verdict = TwoNodeVerdict::IndeterminateByTheorem;
  const SystemInstance inst = two_node_instance(alpha, beta, a, t);
  r.fixed_points = find_fixed_points(inst);
  for (const auto& fp : r.fixed_points) {
    if (fp.classification != FixedPointClass::Stable) continue;
    for (Index i = 0; i < 2; ++i) {
      if (fp.x(i) < 1e-3 && fp.s(i) > t[i] &&
          std::find(r.uncontrollable.begin(), r.uncontrollable.end(), i) == r.uncontrollable.end()) {
        r.uncontrollable.push_back(i);
      }
    }
  }
  std::sort(r.uncontrollable.begin(), r.uncontrollable.end());
  return r;
}

std::vector<Index> detect_uncontrollable_overload(const Trajectory& traj, const Vector& capacities,
                                                  double x_tol, double s_tol) {
  if (!traj.converged) throw Error(ErrorCode::NotConverged, "trajectory did not reach steady state", -1, -1, traj.residual);
  return overloaded_nodes(traj.final_x(), traj.final_s(), capacities, x_tol, s_tol);
}

std::vector<Index> overloaded_nodes(const ControlVector& x, const LoadVector& s,
                                    const Vector& capacities, double x_tol, double s_tol) {
  if (x.size() != capacities.size() || s.size() != capacities.size()) {
    throw Error(ErrorCode::DimensionMismatch, "capacity vector length");
  }
  std::vector<Index> nodes;
  for (Index i = 0; i < x.size(); ++i) {
    if (x(i) < x_tol && s(i) > capacities(i) + s_tol) nodes.push_back(i);
  }
  return nodes;
}

Vector orbit_average_load(const Trajectory& traj, double t0, double t1) {
  constexpr double slack = 1e-9;
  if (traj.t.empty() || !(t0 < t1) || t0 < traj.t.front() - slack || t1 > traj.t.back() + slack) {
    throw Error(ErrorCode::BadInterval, "window not covered by the trajectory");
  }
  const auto first = std::lower_bound(traj.t.begin(), traj.t.end(), t0 - slack) - traj.t.begin();
  const auto last = std::upper_bound(traj.t.begin(), traj.t.end(), t1 + slack) - traj.t.begin() - 1;
  if (last <= first) throw Error(ErrorCode::BadInterval, "window holds fewer than two samples");
  const double lo = traj.clamp_eps;
  const double hi = 1.0 - traj.clamp_eps;
  Vector integral = Vector::Zero(traj.s.front().size());
  for (auto k = first; k <= last; ++k) {
    const Vector& x = traj.x[k];
    for (Index i = 0; i < x.size(); ++i) {
      if (!(x(i) > lo && x(i) < hi)) {
        throw Error(ErrorCode::BoundaryTouched, "x leaves the open band inside the window", i, -1, traj.t[k]);
      }
    }
    if (k > first) integral += 0.5 * (traj.t[k] - traj.t[k - 1]) * (traj.s[k] + traj.s[k - 1]);
  }
  return integral / (traj.t[last] - traj.t[first]);
}

PeriodicOrbit find_periodic_orbit(const SystemInstance& instance, const OdeConfig& config,
                                  const ControlVector& x0, const ArrivalSchedule& arrivals,
                                  double period, double tol) {
  const long per = std::lround(period / config.dt);
  if (per < 2 || std::abs(static_cast<double>(per) * config.dt - period) > 1e-9 * period) {
    throw Error(ErrorCode::BadInterval, "period must be a multiple of dt", -1, -1, period);
  }
  OdeConfig cfg = config;
  cfg.record_stride = 1;
  PeriodicOrbit orbit;
  orbit.trajectory = integrate_forced(instance, cfg, x0, arrivals);
  const auto& xs = orbit.trajectory.x;
  for (std::size_t k = 2 * static_cast<std::size_t>(per); k < xs.size(); k += static_cast<std::size_t>(per)) {
    const double dist = (xs[k] - xs[k - static_cast<std::size_t>(per)]).lpNorm<Eigen::Infinity>();
    if (dist < tol) {
      orbit.period = period;
      orbit.t_start = orbit.trajectory.t[k - static_cast<std::size_t>(per)];
      orbit.return_distance = dist;
      orbit.average_load = orbit_average_load(orbit.trajectory, orbit.t_start, orbit.t_start + period);
      return orbit;
    }
  }
  throw Error(ErrorCode::NotFound, "no return within tolerance before the horizon");
}

}  // namespace cdnlb
