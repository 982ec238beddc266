#include "cdnlb/model.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace cdnlb {

CorrelationMatrix CorrelationMatrix::identity(Index n) {
  if (n < 1) throw Error(ErrorCode::NonSquare, "correlation matrix needs at least one node");
  return CorrelationMatrix(Matrix::Identity(n, n));
}

CorrelationMatrix validate_correlation(const Matrix& raw, double tol) {
  if (raw.rows() != raw.cols() || raw.rows() < 1) {
    throw Error(ErrorCode::NonSquare, "matrix is " + std::to_string(raw.rows()) + "x" +
                                          std::to_string(raw.cols()));
  }
  for (Index i = 0; i < raw.rows(); ++i) {
    double sum = 0.0;
    for (Index j = 0; j < raw.cols(); ++j) {
      const double v = raw(i, j);
      // NaN fails this comparison too.
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw Error(ErrorCode::NegativeEntry,
                    "entry (" + std::to_string(i) + ", " + std::to_string(j) + ") = " +
                        std::to_string(v),
                    static_cast<long>(i), static_cast<long>(j), v);
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw Error(ErrorCode::RowSumViolation,
                  "row " + std::to_string(i) + " sums to " + std::to_string(sum),
                  static_cast<long>(i), -1, sum);
    }
  }
  return CorrelationMatrix(raw);
}

CorrelationMatrix normalize_rows(Matrix raw) {
  for (Index i = 0; i < raw.rows(); ++i) {
    const double s = raw.row(i).sum();
    if (!(s > 0.0)) {
      throw Error(ErrorCode::RowSumViolation, "row " + std::to_string(i) + " has no mass",
                  static_cast<long>(i), -1, s);
    }
    raw.row(i) /= s;
  }
  return validate_correlation(raw);
}

CostParams CostParams::uniform(Index n, const NodeCosts& c) {
  return {Vector::Constant(n, c.eta), Vector::Constant(n, c.theta), Vector::Constant(n, c.d),
          Vector::Constant(n, c.gamma_cost)};
}

namespace {

void require_size(const Vector& v, Index n, const char* what) {
  if (v.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has " +
                                                  std::to_string(v.size()) + " entries, expected " +
                                                  std::to_string(n));
  }
}

template <class Pred>
void require_all(const Vector& v, Pred ok, const char* what) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!ok(v(i))) {
      throw Error(ErrorCode::InvalidValue,
                  std::string(what) + "[" + std::to_string(i) + "] = " + std::to_string(v(i)),
                  static_cast<long>(i), -1, v(i));
    }
  }
}

}  // namespace

SystemInstance::SystemInstance(CorrelationMatrix correlation, Vector arrivals,
                               Vector capacities, CostParams costs)
    : c_(std::move(correlation)),
      a_(std::move(arrivals)),
      t_(std::move(capacities)),
      costs_(std::move(costs)) {
  const Index n = c_.size();
  require_size(a_, n, "arrivals");
  require_size(t_, n, "capacities");
  require_size(costs_.eta, n, "eta");
  require_size(costs_.theta, n, "theta");
  require_size(costs_.d, n, "d");
  require_size(costs_.gamma_cost, n, "gamma_cost");

  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  require_all(a_, nonneg, "arrivals");
  require_all(t_, positive, "capacities");
  require_all(costs_.eta, positive, "eta");
  require_all(costs_.theta, positive, "theta");
  require_all(costs_.d, nonneg, "d");
  require_all(costs_.gamma_cost, positive, "gamma_cost");
}

Matrix SystemInstance::load_matrix() const {
  return c_.matrix().transpose() * a_.asDiagonal();
}

SystemInstance SystemInstance::with_arrivals(Vector arrivals) const {
  return SystemInstance(c_, std::move(arrivals), t_, costs_);
}

LoadVector load_map(const CorrelationMatrix& c, const Vector& arrivals, const ControlVector& x) {
  const Index n = c.size();
  if (arrivals.size() != n || x.size() != n) {
    throw Error(ErrorCode::DimensionMismatch, "load_map expects vectors of length " +
                                                  std::to_string(n));
  }
  const Matrix& m = c.matrix();
  LoadVector s = LoadVector::Zero(n);
  for (Index j = 0; j < n; ++j) {
    const double routed = arrivals(j) * x(j);
    if (routed == 0.0) continue;
    for (Index i = 0; i < n; ++i) s(i) += m(j, i) * routed;
  }
  return s;
}

void check_control(const ControlVector& x) {
  for (Index i = 0; i < x.size(); ++i) {
    if (!(x(i) >= 0.0 && x(i) <= 1.0)) {
      throw Error(ErrorCode::OutOfRangeControl,
                  "x[" + std::to_string(i) + "] = " + std::to_string(x(i)),
                  static_cast<long>(i), -1, x(i));
    }
  }
}

std::pair<double, double> effective_self_correlation(const CorrelationMatrix& c,
                                                     std::span<const Index> group1,
                                                     std::span<const Index> group2) {
  const Index n = c.size();
  if (group1.empty() || group2.empty() ||
      static_cast<Index>(group1.size() + group2.size()) != n) {
    throw Error(ErrorCode::BadPartition, "groups must be nonempty and cover every node once");
  }
  std::vector<int> owner(static_cast<std::size_t>(n), 0);
  auto mark = [&](std::span<const Index> g, int tag) {
    for (Index i : g) {
      if (i < 0 || i >= n || owner[static_cast<std::size_t>(i)] != 0) {
        throw Error(ErrorCode::BadPartition, "node " + std::to_string(i) +
                                                 " is out of range or listed twice");
      }
      owner[static_cast<std::size_t>(i)] = tag;
    }
  };
  mark(group1, 1);
  mark(group2, 2);

  auto within = [&](std::span<const Index> g) {
    double total = 0.0;
    for (Index i : g)
      for (Index j : g) total += c(i, j);
    return total / static_cast<double>(g.size());
  };
  return {within(group1), within(group2)};
}

}  // namespace cdnlb
