#include <array>

#include "cdnlb/model.hpp"
#include "support.hpp"

using namespace cdnlb;
using namespace cdnlb::test;

TEST_SUITE("model") {

TEST_CASE("validate_correlation accepts the two-node example and the identity") {
  CHECK_NOTHROW(validate_correlation(mat2(0.1, 0.9, 0.5, 0.5), 1e-9));
  CHECK_NOTHROW(validate_correlation(Matrix::Identity(5, 5), 0.0));
}

TEST_CASE("validate_correlation reports the offending row") {
  try {
    validate_correlation(mat2(0.6, 0.5, 0.3, 0.7), 1e-9);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RowSumViolation);
    CHECK(e.row() == 0);
    CHECK(e.value() == doctest::Approx(1.1));
  }
}

TEST_CASE("validate_correlation rejects negative entries and non-square input") {
  try {
    validate_correlation(mat2(1.2, -0.2, 0.5, 0.5));
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NegativeEntry);
    CHECK(e.row() == 0);
    CHECK(e.col() == 1);
  }
  CHECK(error_code_of([] { validate_correlation(Matrix::Ones(2, 3) / 3.0); }) == ErrorCode::NonSquare);
}

TEST_CASE("normalize_rows") {
  Matrix m(2, 2);
  m << 1, 3, 2, 2;
  const CorrelationMatrix c = normalize_rows(m);
  CHECK(c(0, 0) == doctest::Approx(0.25));
  CHECK(c(1, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(normalize_rows(Matrix::Zero(2, 2)), Error);
}

TEST_CASE("load_map examples") {
  const CorrelationMatrix c = validate_correlation(mat2(0.1, 0.9, 0.5, 0.5));
  const Vector s = load_map(c, vec({1, 1}), vec({1, 1}));
  CHECK(s(0) == doctest::Approx(0.6));
  CHECK(s(1) == doctest::Approx(1.4));
  CHECK(load_map(c, vec({3, 7}), vec({0, 0})).isZero());

  const Vector s2 = load_map(CorrelationMatrix::identity(2), vec({2, 3}), vec({0.5, 1}));
  CHECK(s2(0) == doctest::Approx(1.0));
  CHECK(s2(1) == doctest::Approx(3.0));
}

TEST_CASE("load_map against an explicit double sum") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 1 + rep % 6;
    const CorrelationMatrix c = random_correlation(n, rng);
    Vector a(n), x(n);
    for (Index i = 0; i < n; ++i) {
      a(i) = 5.0 * u(rng);
      x(i) = u(rng);
    }
    const Vector s = load_map(c, a, x);
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      double expect = 0.0;
      for (Index j = 0; j < n; ++j) expect += c(j, i) * a(j) * x(j);
      CHECK(s(i) == doctest::Approx(expect).epsilon(1e-12));
      total += s(i);
    }
    // Row-stochastic C conserves the routed mass.
    CHECK(total == doctest::Approx(a.dot(x)).epsilon(1e-12));
  }
}

TEST_CASE("load_map is monotone and linear in x") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const CorrelationMatrix c = random_correlation(4, rng);
  const Vector a = vec({1.5, 0.2, 3.0, 0.7});
  const Vector x = vec({0.1, 0.4, 0.3, 0.9});
  const Vector y = vec({0.8, 0.0, 1.0, 0.2});
  const double lam = 0.3;
  const Vector mixed = load_map(c, a, lam * x + (1 - lam) * y);
  const Vector expect = lam * load_map(c, a, x) + (1 - lam) * load_map(c, a, y);
  CHECK((mixed - expect).cwiseAbs().maxCoeff() < 1e-14);
  Vector bumped = x;
  bumped(2) += 0.05;
  CHECK(((load_map(c, a, bumped) - load_map(c, a, x)).array() >= 0.0).all());
}

TEST_CASE("load_map input checks") {
  const CorrelationMatrix c = CorrelationMatrix::identity(2);
  CHECK(error_code_of([] { check_control(vec({0.5, 1.5})); }) == ErrorCode::OutOfRangeControl);
  CHECK(error_code_of([&] { load_map(c, vec({1, 1, 1}), vec({0.5, 0.5})); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("effective_self_correlation examples") {
  const CorrelationMatrix fig3 = validate_correlation(mat2(0.1, 0.9, 0.5, 0.5));
  const std::array<Index, 1> a{0}, b{1};
  auto [alpha, beta] = effective_self_correlation(fig3, a, b);
  CHECK(alpha == doctest::Approx(0.1));
  CHECK(beta == doctest::Approx(0.5));

  const std::array<Index, 2> g1{0, 1}, g2{2, 3};
  auto id = effective_self_correlation(CorrelationMatrix::identity(4), g1, g2);
  CHECK(id.first == doctest::Approx(1.0));
  CHECK(id.second == doctest::Approx(1.0));

  Matrix m(4, 4);
  m << 0.4, 0.3, 0.2, 0.1,
       0.3, 0.4, 0.2, 0.1,
       0.1, 0.1, 0.5, 0.3,
       0.1, 0.1, 0.3, 0.5;
  auto blk = effective_self_correlation(validate_correlation(m), g1, g2);
  CHECK(blk.first == doctest::Approx(0.7));
  CHECK(blk.second == doctest::Approx(0.8));
}

TEST_CASE("effective_self_correlation rejects bad partitions") {
  const CorrelationMatrix c = CorrelationMatrix::identity(3);
  const std::array<Index, 1> a{0};
  const std::array<Index, 1> b{1};
  const std::array<Index, 2> overlap{0, 2};
  const std::array<Index, 0> none{};
  CHECK(error_code_of([&] { effective_self_correlation(c, a, b); }) == ErrorCode::BadPartition);
  CHECK(error_code_of([&] { effective_self_correlation(c, overlap, a); }) == ErrorCode::BadPartition);
  CHECK(error_code_of([&] { effective_self_correlation(c, none, a); }) == ErrorCode::BadPartition);
}

TEST_CASE("SystemInstance checks dimensions and values") {
  const CorrelationMatrix c = CorrelationMatrix::identity(2);
  const CostParams p = CostParams::uniform(2, NodeCosts{});
  CHECK(error_code_of([&] { SystemInstance(c, vec({1}), vec({1, 1}), p); }) == ErrorCode::DimensionMismatch);
  CHECK(error_code_of([&] { SystemInstance(c, vec({-1, 1}), vec({1, 1}), p); }) == ErrorCode::InvalidValue);
  CHECK_THROWS_AS(SystemInstance(c, vec({1, 1}), vec({0, 1}), p), Error);

  const SystemInstance inst = fig3_instance();
  CHECK(inst.total_arrival() == 2.0);
  CHECK(inst.max_capacity() == 0.7);
  const Matrix b = inst.load_matrix();
  CHECK(b(1, 0) == doctest::Approx(0.9));
  CHECK(b(0, 1) == doctest::Approx(0.5));
}

}
