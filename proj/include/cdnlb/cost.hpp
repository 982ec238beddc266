#pragma once

#include <functional>

#include "cdnlb/model.hpp"

namespace cdnlb {

// Proxy cost g(S) = eta * S / (1 - S/T): aggregate M/G/1 queueing delay.
// The finite branch diverges at S = T, so S >= T is the +infinity branch.
double proxy_cost(double eta, double capacity, double load);
double proxy_cost_derivative(double eta, double capacity, double load);

// Offload cost h(x) = theta * A (1 - x) (d + gamma_cost * A (1 - x)).
double offload_cost(const NodeCosts& c, double arrival, double x);
double offload_cost_derivative(const NodeCosts& c, double arrival, double x);

/// W(x, S) = sum_i g_i(S_i) + h_i(x_i); +infinity when any S_i >= T_i.
double total_cost(const SystemInstance& instance, const ControlVector& x, const LoadVector& s);

/// W(x, load_map(x)): the cost of operating at control x.
double operating_cost(const SystemInstance& instance, const ControlVector& x);

/// argmin over [0, T] of g(S) - mu S.
double solve_sub_S(double eta, double capacity, double mu);

/// argmin over [0, 1] of h(x) + A beta x, from the stationarity condition
/// clamped to the unit interval. A = 0 makes the objective constant; x = 1.
double solve_sub_x(double theta, double d, double gamma_cost, double arrival, double beta);
inline double solve_sub_x(const NodeCosts& c, double arrival, double beta) {
  return solve_sub_x(c.theta, c.d, c.gamma_cost, arrival, beta);
}

/// Golden-section search for the minimizer of a convex f on [lo, hi].
/// Only interior points are evaluated, so f may be infinite at the ends.
double minimize_scalar_convex(const std::function<double(double)>& f, double lo, double hi,
                              double tol);

}  // namespace cdnlb
