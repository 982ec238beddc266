#pragma once

#include <limits>
#include <vector>

#include "cdnlb/model.hpp"

namespace cdnlb {

/// Iterate of the projected super-gradient method. After a step, mu holds
/// mu(k+1) while x, s and s_obs are the primal quantities of iteration k.
struct DualState {
  Vector mu;
  Vector x;
  Vector s;
  Vector s_obs;
  long k = 0;
};

/// mu = 0 with empty primal iterates.
DualState cold_start(const SystemInstance& instance);

/// Coupling factors beta_i = sum_j mu_j C_ij. The dot products are
/// accumulated with error-free transformations and rounded once, so the
/// result is the correctly rounded exact value.
Vector beta_projection(const CorrelationMatrix& c, const Vector& mu);

/// Per-node Lagrangian subproblem solutions for a given (mu, beta).
struct PrimalResponse {
  Vector x;
  Vector s;
};
PrimalResponse solve_subproblems(const SystemInstance& instance, const Vector& mu,
                                 const Vector& beta);

/// Projected multiplier update for one node: max(0, mu + alpha (s_obs - s)).
inline double dual_update(double mu, double alpha, double s_obs, double s) {
  const double g = s_obs - s;
  return mu + alpha * g > 0.0 ? mu + alpha * g : 0.0;
}

/// dual_update applied componentwise.
Vector project_dual(const Vector& mu, double alpha, const Vector& s_obs, const Vector& s);

/// One synchronous iteration: primal responses at the current mu, observed
/// loads through the load map, then the dual update.
DualState dual_step(const DualState& state, double alpha, const SystemInstance& instance);

/// 2 epsilon / (A_max^2 + N T_max^2).
double step_size(double epsilon, double a_max, double t_max, Index n);

/// A_max^2 + N T_max^2, a uniform bound on the squared super-gradient norm.
double supergradient_norm_bound(double a_max, double t_max, Index n);

struct StepSizePolicy {
  enum class Schedule { Constant, Diminishing };

  double alpha = 0.0;
  Schedule schedule = Schedule::Constant;

  static StepSizePolicy constant(double alpha);
  /// Constant step from the accuracy target, with A_max = sum_i A_i and
  /// T_max = max_i T_i of the instance.
  static StepSizePolicy for_epsilon(double epsilon, const SystemInstance& instance);
  static StepSizePolicy diminishing(double alpha0);

  /// Step used at iteration k: alpha, or alpha / sqrt(k + 1) when diminishing.
  double at(long k) const;
};

/// Lagrangian value at the subproblem minimizers, i.e. the dual function D(mu).
/// Uses sum_i A_i beta_i x_i = sum_i mu_i s_obs_i.
double dual_objective(const SystemInstance& instance, const Vector& mu, const Vector& x,
                      const Vector& s, const Vector& s_obs);

struct DualOptions {
  long max_iters = 20000;
  /// Stop once the best primal cost improved by less than this over `window`
  /// iterations. Zero disables the rule.
  double stop_tol = 0.0;
  long window = 100;
  /// Keep every n-th iteration in the trajectory (0 keeps none).
  long record_stride = 1;
};

struct DualRecord {
  long k = 0;
  double cost = 0.0;      // W(x, s_obs), +inf while some proxy is over capacity
  double dual_obj = 0.0;  // D(mu(k))
  double grad_norm = 0.0; // ||s_obs - s||_2
  Vector mu;              // mu(k), the multipliers that produced x and s
  Vector x;
  Vector s;
  Vector s_obs;
};

struct ConvergenceReport {
  std::vector<DualRecord> trajectory;
  std::vector<double> grad_norms_sq;
  double best_cost = std::numeric_limits<double>::infinity();
  ControlVector best_x;
  long best_k = -1;
  double best_dual = -std::numeric_limits<double>::infinity();
  long iterations = 0;
  bool converged = false;
  double norm_bound = 0.0;
  long bound_violations = 0;
  DualState final_state;
};

/// Bookkeeping shared by the central and distributed drivers, so both
/// produce reports through identical arithmetic.
class ConvergenceTracker {
 public:
  ConvergenceTracker(const SystemInstance& instance, const DualOptions& options);

  /// Records iteration k. Returns true when the run should stop.
  bool observe(const Vector& mu_before, const DualState& after);

  ConvergenceReport finish(DualState final_state) &&;

  std::size_t recorded() const noexcept { return report_.trajectory.size(); }

 private:
  const SystemInstance& instance_;
  DualOptions options_;
  ConvergenceReport report_;
  std::vector<double> best_history_;
};

/// Centralized simulation of the dual algorithm from mu = 0.
ConvergenceReport run_dual(const SystemInstance& instance, const StepSizePolicy& policy,
                           const DualOptions& options = {});

enum class OracleMode {
  /// Exhaustive grid over x in [0,1]^N. The last coordinate is searched by
  /// discrete convex minimization, which returns the same grid minimum.
  Grid,
  /// Projected gradient descent with backtracking, for larger N.
  ProjectedGradient,
};

struct ReferenceOptimum {
  ControlVector x;
  double cost = 0.0;
};

/// Ground-truth minimizer of W(x, load_map(x)) over the unit hypercube.
/// Grid ties resolve to the lexicographically lowest x.
ReferenceOptimum reference_optimum(const SystemInstance& instance, double tol,
                                   OracleMode mode = OracleMode::Grid);

}  // namespace cdnlb
