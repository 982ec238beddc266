#include <cmath>
#include <limits>

#include "cdnlb/cost.hpp"
#include "cdnlb/dual.hpp"
#include "support.hpp"

using namespace cdnlb;
using namespace cdnlb::test;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SystemInstance single_node(double a) {
  return SystemInstance(CorrelationMatrix::identity(1), vec({a}), vec({0.7}),
                        CostParams::uniform(1, NodeCosts{}));
}

// Full enumeration of a two-node grid, without any search shortcuts.
double brute_force_two_node(const SystemInstance& inst, int m) {
  double best = kInf;
  for (int i = 0; i <= m; ++i)
    for (int j = 0; j <= m; ++j) best = std::min(best, operating_cost(inst, vec({double(i) / m, double(j) / m})));
  return best;
}

}  // namespace

TEST_SUITE("dual") {

TEST_CASE("beta_projection examples") {
  const CorrelationMatrix c = validate_correlation(mat2(0.6, 0.4, 0.3, 0.7));
  const Vector beta = beta_projection(c, vec({2, 3}));
  CHECK(beta(0) == doctest::Approx(2.4));
  CHECK(beta(1) == doctest::Approx(2.7));
  CHECK(beta_projection(c, vec({0, 0})).isZero());
  const Vector mu = vec({1.25, 7, 0.001});
  CHECK(beta_projection(CorrelationMatrix::identity(3), mu) == mu);
}

TEST_CASE("beta_projection is the correctly rounded dot product") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int rep = 0; rep < 200; ++rep) {
    const Index n = 2 + rep % 7;
    const CorrelationMatrix c = random_correlation(n, rng);
    Vector mu(n);
    for (Index i = 0; i < n; ++i) mu(i) = u(rng);
    const Vector beta = beta_projection(c, mu);
    for (Index i = 0; i < n; ++i) {
      long double exact = 0.0L;
      for (Index j = 0; j < n; ++j) exact += static_cast<long double>(c(i, j)) * mu(j);
      // long double carries 64 bits, enough to pin the double rounding here.
      const long double ulp = std::nextafter(beta(i), INFINITY) - beta(i);
      CHECK(std::abs(static_cast<long double>(beta(i)) - exact) <= 0.5000001L * ulp);
    }
  }
}

TEST_CASE("step_size and norm bound examples") {
  CHECK(supergradient_norm_bound(2, 0.7, 2) == doctest::Approx(4.98));
  CHECK(supergradient_norm_bound(0, 1, 3) == doctest::Approx(3));
  CHECK(supergradient_norm_bound(1, 1, 1) == doctest::Approx(2));
  CHECK(step_size(0.1, 2, 0.7, 2) == doctest::Approx(0.2 / 4.98));
  CHECK(step_size(0.2, 2, 0.7, 2) == doctest::Approx(2 * step_size(0.1, 2, 0.7, 2)));
  CHECK(step_size(0.1, 2, 0.7, 4) == doctest::Approx(0.2 / 5.96));
  CHECK(error_code_of([] { step_size(0, 2, 0.7, 2); }) == ErrorCode::NonPositiveInput);
  CHECK(error_code_of([] { step_size(0.1, 2, 0.7, 0); }) == ErrorCode::NonPositiveInput);
}

TEST_CASE("step size policies") {
  const SystemInstance inst = fig3_instance();
  const StepSizePolicy p = StepSizePolicy::for_epsilon(0.1, inst);
  CHECK(p.alpha == doctest::Approx(0.2 / 4.98));
  CHECK(p.at(0) == p.at(1000));
  const StepSizePolicy d = StepSizePolicy::diminishing(1.0);
  CHECK(d.at(3) == doctest::Approx(0.5));
  CHECK_THROWS_AS(StepSizePolicy::constant(-1), Error);
}

TEST_CASE("first step from cold start") {
  const SystemInstance inst = fig3_instance();
  const double alpha = 0.04;
  const DualState s1 = dual_step(cold_start(inst), alpha, inst);
  CHECK(s1.k == 1);
  CHECK(s1.s.isZero());
  // beta = 0: h is minimized by routing everything, x = 1.
  CHECK(s1.x == vec({1, 1}));
  const Vector s_obs = load_map(inst.correlation(), inst.arrivals(), s1.x);
  CHECK(s1.s_obs == s_obs);
  CHECK(s1.mu(0) == alpha * s_obs(0));
  CHECK(s1.mu(1) == alpha * s_obs(1));
}

TEST_CASE("projection keeps multipliers nonnegative") {
  CHECK(dual_update(0.1, 1.0, 0.0, 0.5) == 0.0);
  CHECK(dual_update(0.1, 1.0, 0.5, 0.0) == doctest::Approx(0.6));
  const Vector mu = project_dual(vec({0.1, 2}), 1.0, vec({0, 0}), vec({0.5, 0.5}));
  CHECK(mu == vec({0, 1.5}));
}

TEST_CASE("dual_objective equals the Lagrangian") {
  const SystemInstance inst = fig3_instance();
  const Vector mu = vec({3.0, 8.0});
  const Vector beta = beta_projection(inst.correlation(), mu);
  const PrimalResponse r = solve_subproblems(inst, mu, beta);
  const Vector s_obs = load_map(inst.correlation(), inst.arrivals(), r.x);
  double lagrangian = 0.0;
  for (Index i = 0; i < 2; ++i) {
    lagrangian += proxy_cost(1, 0.7, r.s(i)) + offload_cost(NodeCosts{}, 1, r.x(i)) - mu(i) * r.s(i) +
                  inst.arrivals()(i) * beta(i) * r.x(i);
  }
  CHECK(dual_objective(inst, mu, r.x, r.s, s_obs) == doctest::Approx(lagrangian).epsilon(1e-12));
}

TEST_CASE("run_dual on the two-node instance") {
  const SystemInstance inst = fig3_instance();
  DualOptions opt;
  opt.max_iters = 20000;
  const ConvergenceReport rep = run_dual(inst, StepSizePolicy::for_epsilon(0.1, inst), opt);
  const ReferenceOptimum ref = reference_optimum(inst, 1e-3);
  CHECK(std::isfinite(rep.best_cost));
  CHECK(rep.best_cost <= ref.cost + 0.1);
  CHECK(rep.bound_violations == 0);
  CHECK(rep.grad_norms_sq.size() == static_cast<std::size_t>(rep.iterations));
  // Weak duality: no dual value exceeds the primal optimum.
  for (const DualRecord& r : rep.trajectory) CHECK(r.dual_obj <= ref.cost + 1e-9);
  for (double g : rep.grad_norms_sq) CHECK(g <= 4.98);
}

TEST_CASE("run_dual with no traffic converges at once") {
  const SystemInstance inst(CorrelationMatrix::identity(3), Vector::Zero(3), Vector::Constant(3, 0.7),
                            CostParams::uniform(3, NodeCosts{}));
  const ConvergenceReport rep = run_dual(inst, StepSizePolicy::constant(0.1));
  CHECK(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK(rep.best_cost == 0.0);
  CHECK(rep.best_x == Vector::Ones(3));
}

TEST_CASE("single node against a grid over (x, S)") {
  const SystemInstance inst = single_node(1.0);
  // W(x, S) with S pinned to the load map; the grid covers both axes.
  double best = kInf;
  for (int i = 0; i <= 1000; ++i) {
    const double x = i / 1000.0;
    for (int j = 0; j <= 1000; ++j) {
      const double s = 0.7 * j / 1000.0;
      if (std::abs(s - x) > 0.7e-3 / 2) continue;
      best = std::min(best, total_cost(inst, vec({x}), vec({s})));
    }
  }
  const ConvergenceReport rep = run_dual(inst, StepSizePolicy::for_epsilon(0.05, inst));
  CHECK(rep.best_cost <= best + 0.1);
  const ReferenceOptimum ref = reference_optimum(inst, 1e-3);
  CHECK(std::abs(ref.cost - rep.best_cost) < 1e-2);
}

TEST_CASE("reference_optimum against full enumeration") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    CostParams p = CostParams::uniform(2, NodeCosts{});
    p.d = vec({u(rng), u(rng)});
    const SystemInstance inst(random_correlation(2, rng), vec({0.2 + 1.5 * u(rng), 0.2 + 1.5 * u(rng)}),
                              vec({0.7, 0.7}), p);
    const double brute = brute_force_two_node(inst, 200);
    CHECK(reference_optimum(inst, 1.0 / 200).cost == doctest::Approx(brute).epsilon(1e-12));
    const ReferenceOptimum pg = reference_optimum(inst, 1e-9, OracleMode::ProjectedGradient);
    CHECK(pg.cost <= brute + 1e-12);
    CHECK(pg.cost >= brute - 0.05);
  }
}

TEST_CASE("reference_optimum edge cases") {
  const SystemInstance idle(CorrelationMatrix::identity(2), Vector::Zero(2), Vector::Constant(2, 0.7),
                            CostParams::uniform(2, NodeCosts{}));
  const ReferenceOptimum r = reference_optimum(idle, 1e-2);
  CHECK(r.cost == 0.0);

  const SystemInstance inst = fig3_instance();
  const ReferenceOptimum ref = reference_optimum(inst, 1e-3);
  const Vector s = load_map(inst.correlation(), inst.arrivals(), ref.x);
  CHECK(s.maxCoeff() < 0.7);
  CHECK(error_code_of([&] { reference_optimum(inst, 0); }) == ErrorCode::NonPositiveInput);
}

TEST_CASE("window stopping rule") {
  const SystemInstance inst = fig3_instance();
  DualOptions opt;
  opt.stop_tol = 1e-6;
  opt.window = 50;
  const ConvergenceReport rep = run_dual(inst, StepSizePolicy::for_epsilon(0.1, inst), opt);
  CHECK(rep.converged);
  CHECK(rep.iterations < opt.max_iters);
}

TEST_CASE("record stride") {
  const SystemInstance inst = fig3_instance();
  DualOptions opt;
  opt.max_iters = 100;
  opt.record_stride = 10;
  const ConvergenceReport rep = run_dual(inst, StepSizePolicy::constant(0.04), opt);
  REQUIRE(rep.trajectory.size() == 10);
  CHECK(rep.trajectory[3].k == 30);
  opt.record_stride = 0;
  CHECK(run_dual(inst, StepSizePolicy::constant(0.04), opt).trajectory.empty());
}

}
