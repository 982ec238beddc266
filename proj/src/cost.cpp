#include "cdnlb/cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cdnlb {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double proxy_cost(double eta, double capacity, double load) {
  if (load < 0.0) throw Error(ErrorCode::NegativeLoad, "load " + std::to_string(load), -1, -1, load);
  if (load >= capacity) return kInf;
  return eta * load / (1.0 - load / capacity);
}

double proxy_cost_derivative(double eta, double capacity, double load) {
  if (load >= capacity) return kInf;
  const double u = 1.0 - load / capacity;
  return eta / (u * u);
}

double offload_cost(const NodeCosts& c, double arrival, double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw Error(ErrorCode::OutOfRangeControl, "x = " + std::to_string(x), -1, -1, x);
  }
  const double off = arrival * (1.0 - x);
  return c.theta * off * (c.d + c.gamma_cost * off);
}

double offload_cost_derivative(const NodeCosts& c, double arrival, double x) {
  const double off = arrival * (1.0 - x);
  return -c.theta * arrival * (c.d + 2.0 * c.gamma_cost * off);
}

double total_cost(const SystemInstance& instance, const ControlVector& x, const LoadVector& s) {
  const Index n = instance.size();
  if (x.size() != n || s.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "total_cost expects vectors of length " + std::to_string(n));
  }
  const CostParams& k = instance.costs();
  double w = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double g = proxy_cost(k.eta(i), instance.capacities()(i), s(i));
    if (std::isinf(g)) return kInf;
    w += g + offload_cost(k.node(i), instance.arrivals()(i), x(i));
  }
  return w;
}

double operating_cost(const SystemInstance& instance, const ControlVector& x) {
  return total_cost(instance, x, load_map(instance.correlation(), instance.arrivals(), x));
}

double solve_sub_S(double eta, double capacity, double mu) {
  if (!(mu > 0.0)) return 0.0;
  return capacity * std::max(0.0, 1.0 - std::sqrt(eta / mu));
}

double solve_sub_x(double theta, double d, double gamma_cost, double arrival, double beta) {
  if (arrival == 0.0) return 1.0;
  const double x = 1.0 + (theta * d - beta) / (2.0 * theta * gamma_cost * arrival);
  return std::clamp(x, 0.0, 1.0);
}

double minimize_scalar_convex(const std::function<double(double)>& f, double lo, double hi,
                              double tol) {
  if (!(lo < hi) || !(tol > 0.0)) {
    throw Error(ErrorCode::BadInterval, "need lo < hi and tol > 0");
  }
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    // Ties go left; infinite values only occur on the upper side here.
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace cdnlb
