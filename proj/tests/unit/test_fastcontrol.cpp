#include <cmath>

#include "cdnlb/cost.hpp"
#include "cdnlb/fastcontrol.hpp"
#include "support.hpp"

using namespace cdnlb;
using namespace cdnlb::test;

namespace {

RateMatrix rates_for(const CorrelationMatrix& c, const Vector& mu, double gamma) {
  const Index n = c.size();
  RateMatrix r(n);
  for (Index i = 0; i < n; ++i) {
    r.set_row(i, generation_rates(mu(i), c.matrix().row(i).transpose(), c.matrix().col(i), gamma, i));
  }
  return r;
}

void check_identical(const ConvergenceReport& a, const ConvergenceReport& b) {
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t k = 0; k < a.trajectory.size(); ++k) {
    const DualRecord& x = a.trajectory[k];
    const DualRecord& y = b.trajectory[k];
    REQUIRE(x.mu == y.mu);
    REQUIRE(x.x == y.x);
    REQUIRE(x.s == y.s);
    REQUIRE(x.s_obs == y.s_obs);
  }
  CHECK(a.final_state.mu == b.final_state.mu);
  CHECK(a.best_cost == b.best_cost);
}

}  // namespace

TEST_SUITE("fastcontrol") {

TEST_CASE("generation_rates examples") {
  const CorrelationMatrix c = validate_correlation(mat2(0.6, 0.4, 0.3, 0.7));
  const auto r = generation_rates(2, c.matrix().row(0).transpose(), c.matrix().col(0), 1);
  CHECK(static_cast<double>(r[0]) == doctest::Approx(2));
  CHECK(static_cast<double>(r[1]) == doctest::Approx(1.5));
  for (Rate v : generation_rates(0, c.matrix().row(1).transpose(), c.matrix().col(1), 1)) CHECK(v == 0);

  const CorrelationMatrix id = CorrelationMatrix::identity(3);
  const auto ri = generation_rates(5, id.matrix().row(1).transpose(), id.matrix().col(1), 2);
  CHECK(static_cast<double>(ri[1]) == 10.0);
  CHECK(ri[0] == 0);
  CHECK(ri[2] == 0);
}

TEST_CASE("deliver exact recovers beta") {
  const CorrelationMatrix c = validate_correlation(mat2(0.6, 0.4, 0.3, 0.7));
  AnycastChannel ch = AnycastChannel::exact();
  const auto r = ch.deliver(rates_for(c, vec({2, 3}), 1), c);
  CHECK(static_cast<double>(r[0]) == doctest::Approx(2.4));
  CHECK(static_cast<double>(r[1]) == doctest::Approx(2.7));
  for (Rate v : ch.deliver(rates_for(c, vec({0, 0}), 1), c)) CHECK(v == 0);
}

TEST_CASE("exact reception reproduces beta_projection bit for bit") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 40.0);
  AnycastChannel ch = AnycastChannel::exact();
  for (int rep = 0; rep < 300; ++rep) {
    const Index n = 2 + rep % 5;
    const CorrelationMatrix c = random_correlation(n, rng, 0.001);
    Vector mu(n);
    for (Index i = 0; i < n; ++i) mu(i) = u(rng);
    const double gamma = rep % 2 ? 1.0 : 10.0;
    const auto r = ch.deliver(rates_for(c, mu, gamma), c);
    const Vector beta = beta_projection(c, mu);
    for (Index i = 0; i < n; ++i) REQUIRE(recover_beta(r[static_cast<std::size_t>(i)], gamma) == beta(i));
  }
}

TEST_CASE("sampled reception concentrates") {
  const CorrelationMatrix c = validate_correlation(mat2(0.6, 0.4, 0.3, 0.7));
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    AnycastChannel ch = AnycastChannel::sampled(1e6, seed);
    const auto r = ch.deliver(rates_for(c, vec({2, 3}), 1), c);
    if (std::abs(static_cast<double>(r[0]) - 2.4) < 0.024 && std::abs(static_cast<double>(r[1]) - 2.7) < 0.027) ++within;
  }
  CHECK(within >= 198);
}

TEST_CASE("recover_beta examples") {
  CHECK(recover_beta(2.7, 1) == 2.7);
  CHECK(recover_beta(0.0, 1) == 0.0);
  CHECK(recover_beta(5.4, 2) == 2.7);
}

TEST_CASE("unreachable categories are rejected") {
  Matrix m(3, 3);
  m << 1, 0, 0,
       0.5, 0.5, 0,
       0, 0, 1;
  const CorrelationMatrix c = validate_correlation(m);
  try {
    validate_fastcontrol(c);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnreachableCategory);
    CHECK(e.row() == 0);
    CHECK(e.col() == 1);
  }
  CHECK_NOTHROW(validate_fastcontrol(CorrelationMatrix::identity(3)));
}

TEST_CASE("agents see only local data") {
  const SystemInstance inst = fig3_instance();
  const LocalKnowledge k = local_knowledge(inst, 1, 1.0, StepSizePolicy::constant(0.04));
  CHECK(k.id == 1);
  CHECK(k.row == vec({0.5, 0.5}));
  CHECK(k.col == vec({0.9, 0.5}));
  CHECK(k.arrival == 1.0);

  NodeAgent agent(k);
  CHECK(agent.mu() == 0.0);
  LocalObservation obs;
  obs.arrival = 1.0;
  obs.reception = 0;
  CHECK(agent.respond(obs) == 1.0);
  obs.observed_load = 1.4;
  agent.update(obs);
  CHECK(agent.round() == 1);
  CHECK(agent.mu() == doctest::Approx(0.04 * 1.4));
  CHECK(agent.log().size() == 1);
}

TEST_CASE("distributed exact run matches the central run") {
  const SystemInstance inst = fig3_instance();
  const StepSizePolicy p = StepSizePolicy::constant(0.04);
  DualOptions opt;
  opt.max_iters = 3000;
  const ConvergenceReport central = run_dual(inst, p, opt);
  const DistributedReport d1 = run_distributed(inst, p, 1.0, opt);
  const DistributedReport d10 = run_distributed(inst, p, 10.0, opt);
  check_identical(central, d1.dual);
  check_identical(central, d10.dual);
  CHECK(d10.total_overhead == doctest::Approx(10 * d1.total_overhead).epsilon(1e-12));
  REQUIRE(d1.reception.size() == central.trajectory.size());
  for (std::size_t k = 0; k < d1.reception.size(); ++k) {
    const Vector beta = beta_projection(inst.correlation(), central.trajectory[k].mu);
    CHECK(d1.reception[k] == beta);
  }
}

TEST_CASE("sampled runs approach the exact run as the scale grows") {
  const SystemInstance inst = fig3_instance();
  const StepSizePolicy p = StepSizePolicy::constant(0.04);
  DualOptions opt;
  opt.max_iters = 5000;
  const ConvergenceReport exact = run_distributed(inst, p, 1.0, opt).dual;
  double prev = INFINITY;
  for (double scale : {1e3, 1e4, 1e6}) {
    double mu_err = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ChannelConfig ch{AnycastChannel::Mode::SampledPackets, scale, seed};
      const ConvergenceReport s = run_distributed(inst, p, 1.0, opt, ch).dual;
      CHECK(std::abs(s.best_cost - exact.best_cost) < 0.05);
      mu_err += (s.final_state.mu - exact.final_state.mu).lpNorm<Eigen::Infinity>();
    }
    CHECK(mu_err < prev);
    prev = mu_err;
  }
}

TEST_CASE("carry_data is the load map") {
  const SystemInstance inst = fig3_instance();
  const AnycastChannel ch = AnycastChannel::exact();
  CHECK(ch.carry_data(inst.correlation(), inst.arrivals(), vec({1, 1})) ==
        load_map(inst.correlation(), inst.arrivals(), vec({1, 1})));
}

}
