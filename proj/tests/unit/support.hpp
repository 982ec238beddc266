#pragma once

#include <cmath>
#include <random>

#include <doctest.h>

#include "cdnlb/error.hpp"
#include "cdnlb/model.hpp"

namespace cdnlb::test {

inline Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline SystemInstance fig3_instance() {
  return SystemInstance(validate_correlation(mat2(0.1, 0.9, 0.5, 0.5)), vec({1, 1}),
                        vec({0.7, 0.7}), CostParams::uniform(2, NodeCosts{}));
}

/// Strictly positive row-stochastic matrix.
inline CorrelationMatrix random_correlation(Index n, std::mt19937_64& rng, double floor = 0.02) {
  std::uniform_real_distribution<double> u(floor, 1.0);
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = u(rng);
  for (Index i = 0; i < n; ++i) m.row(i) /= m.row(i).sum();
  return validate_correlation(m, 1e-12);
}

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected cdnlb::Error");
  return ErrorCode::Io;
}

}  // namespace cdnlb::test
