#pragma once

#include <array>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "cdnlb/model.hpp"

namespace cdnlb {

struct OdeConfig {
  double beta_sens = 1.0;
  double dt = 0.01;
  double horizon = 1e4;
  double steady_tol = 1e-8;
  double clamp_eps = 1e-12;
  /// Keep every n-th step in the trajectory; the first and last states are
  /// always kept.
  long record_stride = 1;
};

/// Throws InvalidConfig unless dt, horizon, steady_tol > 0 and
/// 0 < clamp_eps < 1e-6.
void validate(const OdeConfig& config);

struct Trajectory {
  std::vector<double> t;
  std::vector<ControlVector> x;
  std::vector<LoadVector> s;
  bool converged = false;
  /// ||F||_inf at the last state.
  double residual = 0.0;
  /// Band used for clamping; needed by orbit checks.
  double clamp_eps = 0.0;

  const ControlVector& final_x() const { return x.back(); }
  const LoadVector& final_s() const { return s.back(); }
};

/// F_i = -beta_sens x_i (1 - x_i) (S_i - T_i) with S = B x.
Vector vector_field(const SystemInstance& instance, double beta_sens, const ControlVector& x);

/// Classical RK4 from a strictly interior x0. Each step is split into equal
/// substeps when dt exceeds the explicit stability limit of the instance.
/// Stops at the horizon or once ||F||_inf < steady_tol.
Trajectory integrate(const SystemInstance& instance, const OdeConfig& config,
                     const ControlVector& x0);

/// Arrival rates as a function of time.
using ArrivalSchedule = std::function<Vector(double)>;

/// As integrate, with A(t) taken from the schedule. Runs to the horizon.
Trajectory integrate_forced(const SystemInstance& instance, const OdeConfig& config,
                            const ControlVector& x0, const ArrivalSchedule& arrivals);

/// dF/dx, scaled by beta_sens.
Matrix jacobian(const SystemInstance& instance, double beta_sens, const ControlVector& x);

/// Closed form for n <= 2, Eigen's real Schur based solver otherwise.
std::vector<std::complex<double>> eigenvalues(const Matrix& m);

enum class FixedPointClass { Stable, Unstable, Marginal };
std::string to_string(FixedPointClass c);

struct FixedPointReport {
  ControlVector x;
  LoadVector s;
  double residual = 0.0;
  std::vector<std::complex<double>> eigenvalues;
  FixedPointClass classification = FixedPointClass::Marginal;
};

/// Stable iff every Re(lambda) < -1e-9, unstable iff some Re(lambda) > 1e-9.
/// Throws NotAFixedPoint unless ||F(x)||_inf < 1e-8.
FixedPointReport classify_fixed_point(const SystemInstance& instance, const ControlVector& x,
                                      double beta_sens = 1.0);

/// Isolated fixed points. Up to kEnumerateLimit nodes every pattern of
/// (x_i = 0, x_i = 1, S_i = T_i) is solved; larger instances refine the end
/// points of trajectories from the centre and from random starts.
inline constexpr Index kEnumerateLimit = 10;
std::vector<FixedPointReport> find_fixed_points(const SystemInstance& instance,
                                                double beta_sens = 1.0,
                                                const OdeConfig& config = {});

/// Node i passes iff sum_{j != i} C(j, i) A_j <= T_i.
std::vector<bool> stability_polytope_check(const SystemInstance& instance);

struct StabilityVerdict {
  std::vector<bool> in_polytope;
  /// Some stable fixed point has x_i ~ 0 and S_i > T_i.
  std::vector<bool> uncontrollably_overloaded;
  std::vector<FixedPointReport> fixed_points;
  bool all_in_polytope = false;
  bool locally_controllable = false;
};

StabilityVerdict analyze_stability(const SystemInstance& instance, double beta_sens = 1.0,
                                   double x_tol = 1e-3, double s_tol = 1e-6);

enum class TwoNodeVerdict { ControllableForAllA, ControllableSufficient, IndeterminateByTheorem };
std::string to_string(TwoNodeVerdict v);

struct TwoNodeReport {
  TwoNodeVerdict verdict = TwoNodeVerdict::IndeterminateByTheorem;
  /// Filled for IndeterminateByTheorem only.
  std::vector<FixedPointReport> fixed_points;
  /// Nodes left overloaded at x ~ 0 by some stable fixed point.
  std::vector<Index> uncontrollable;
};

/// Two-node system with C = [[alpha, 1 - alpha], [1 - beta, beta]].
TwoNodeReport two_node_classify(double alpha, double beta, std::array<double, 2> arrivals,
                                std::array<double, 2> capacities);

/// C(alpha, beta) instance with default costs.
SystemInstance two_node_instance(double alpha, double beta, std::array<double, 2> arrivals,
                                 std::array<double, 2> capacities);

/// Nodes with x_i < x_tol and S_i > T_i + s_tol.
std::vector<Index> overloaded_nodes(const ControlVector& x, const LoadVector& s,
                                    const Vector& capacities, double x_tol = 1e-3,
                                    double s_tol = 1e-6);

/// overloaded_nodes at the final state of a converged trajectory.
/// Throws NotConverged unless the trajectory reached steady state.
std::vector<Index> detect_uncontrollable_overload(const Trajectory& traj, const Vector& capacities,
                                                  double x_tol = 1e-3, double s_tol = 1e-6);

/// Time average of S over [t0, t1] by the trapezoid rule on the samples.
/// Throws BadInterval if the window is not covered and BoundaryTouched if
/// some x_i leaves (clamp_eps, 1 - clamp_eps) inside it.
Vector orbit_average_load(const Trajectory& traj, double t0, double t1);

struct PeriodicOrbit {
  double t_start = 0.0;
  double period = 0.0;
  double return_distance = 0.0;
  Vector average_load;
  Trajectory trajectory;
};

/// Integrates under a P-periodic schedule until the state returns within
/// tol of its value one period earlier. Throws NotFound if that never
/// happens before the horizon.
PeriodicOrbit find_periodic_orbit(const SystemInstance& instance, const OdeConfig& config,
                                  const ControlVector& x0, const ArrivalSchedule& arrivals,
                                  double period, double tol = 1e-6);

}  // namespace cdnlb
