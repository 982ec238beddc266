#pragma once

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cdnlb/error.hpp"

namespace cdnlb {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Redirection probabilities x, one per node, each in [0, 1].
using ControlVector = Vector;
/// Proxy loads S, one per node.
using LoadVector = Vector;

inline constexpr double kRowSumTolerance = 1e-9;

/// Row-stochastic routing matrix: entry (i, j) is the probability that a user
/// whose DNS query was answered by node i is served by node j's proxy.
/// Instances only exist in validated form.
class CorrelationMatrix {
 public:
  static CorrelationMatrix identity(Index n);

  const Matrix& matrix() const noexcept { return m_; }
  Index size() const noexcept { return m_.rows(); }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  explicit CorrelationMatrix(Matrix m) : m_(std::move(m)) {}
  friend CorrelationMatrix validate_correlation(const Matrix& raw, double tol);

  Matrix m_;
};

/// Checks squareness, nonnegativity and unit row sums (within tol).
/// Throws NonSquare, NegativeEntry(i, j) or RowSumViolation(row, sum).
CorrelationMatrix validate_correlation(const Matrix& raw, double tol = kRowSumTolerance);

/// Scales each row to sum to one, then validates. Rows must have positive mass.
CorrelationMatrix normalize_rows(Matrix raw);

/// Per-node parameters of the proxy and offload cost functions.
struct NodeCosts {
  double eta = 1.0;         // proxy latency weight
  double theta = 10.0;      // offload weight
  double d = 0.5;           // normalized round trip to the data-center
  double gamma_cost = 1.0;  // offload congestion slope
};

struct CostParams {
  Vector eta;
  Vector theta;
  Vector d;
  Vector gamma_cost;

  static CostParams uniform(Index n, const NodeCosts& c);
  NodeCosts node(Index i) const { return {eta(i), theta(i), d(i), gamma_cost(i)}; }
  Index size() const noexcept { return eta.size(); }
};

/// Static problem data. Arrival rates A are piecewise constant; time
/// variation is modelled by building a new instance per interval.
class SystemInstance {
 public:
  SystemInstance(CorrelationMatrix correlation, Vector arrivals, Vector capacities,
                 CostParams costs);

  const CorrelationMatrix& correlation() const noexcept { return c_; }
  const Vector& arrivals() const noexcept { return a_; }
  const Vector& capacities() const noexcept { return t_; }
  const CostParams& costs() const noexcept { return costs_; }
  Index size() const noexcept { return a_.size(); }

  /// Total external arrival rate, the A_max of the super-gradient bound.
  double total_arrival() const { return a_.sum(); }
  double max_capacity() const { return t_.maxCoeff(); }

  /// B = C^T diag(A), so that S = B x.
  Matrix load_matrix() const;

  SystemInstance with_arrivals(Vector arrivals) const;

 private:
  CorrelationMatrix c_;
  Vector a_;
  Vector t_;
  CostParams costs_;
};

/// S_i = sum_j C_ji A_j x_j.
LoadVector load_map(const CorrelationMatrix& c, const Vector& arrivals, const ControlVector& x);

/// Throws OutOfRangeControl unless every entry of x lies in [0, 1].
void check_control(const ControlVector& x);

/// Mean within-group routing mass of a two-way node partition.
std::pair<double, double> effective_self_correlation(const CorrelationMatrix& c,
                                                     std::span<const Index> group1,
                                                     std::span<const Index> group2);

}  // namespace cdnlb
