#include <filesystem>
#include <sstream>

#include "cdnlb/experiment.hpp"
#include "support.hpp"

using namespace cdnlb;
using namespace cdnlb::test;

namespace {

const std::filesystem::path kData = CDNLB_TEST_DATA;

TrialResult row(double v) {
  TrialResult r;
  r.value = v;
  return r;
}

std::string summary_csv(const ExperimentConfig& c) {
  std::ostringstream out;
  const SweepResult r = run_sweep(c);
  write_summary_csv(out, r, c.seed);
  write_trials_csv(out, r);
  return out.str();
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("summarize examples") {
  const SummaryStats a = summarize({row(1), row(2), row(3)});
  CHECK(a.mean == doctest::Approx(2));
  CHECK(a.std == doctest::Approx(1));
  CHECK(a.n_trials == 3);

  const SummaryStats b = summarize({row(4)});
  CHECK(b.std == 0.0);
  CHECK(b.n_trials == 1);

  const SummaryStats c = summarize({row(1), row(INFINITY)});
  CHECK(c.mean == 1.0);
  CHECK(c.n_infeasible == 1);
  CHECK(c.n_trials == 2);

  CHECK(error_code_of([] { summarize({}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("defaults follow the published setup") {
  const ExperimentConfig c = parse_config("{}");
  CHECK(c.n == 60);
  CHECK(c.trials == 100);
  CHECK(c.eta == 1.0);
  CHECK(c.theta == 10.0);
  CHECK(c.gamma_cost == 1.0);
  CHECK(c.capacity == 0.7);
  CHECK(c.mean_load_grid == std::vector<double>{0.1, 0.5, 1, 2, 5, 10});
}

TEST_CASE("config errors") {
  CHECK(error_code_of([] { parse_config(R"({"bogus": 1})"); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { parse_config(R"({"trials": 0})"); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { parse_config(R"({"correlation": {"type": "nope"}})"); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { parse_config("[1,"); }) == ErrorCode::InvalidConfig);
  CHECK(error_code_of([] { parse_config(R"({"mean_load_grid": [-1]})"); }) == ErrorCode::InvalidConfig);
  const ExperimentConfig bad = parse_config(R"({"N": 3, "correlation": {"type": "diagonally_dominant", "diag_min": 1.0}})");
  CHECK(error_code_of([&] { generate_correlation(bad); }) == ErrorCode::GeneratorFailure);
}

TEST_CASE("generators") {
  const ExperimentConfig id = parse_config(R"({"N": 3, "correlation": {"type": "identity"}})");
  CHECK(generate_instance(id, 0, 0).correlation().matrix() == Matrix::Identity(3, 3));

  const ExperimentConfig tb =
      parse_config(R"({"N": 2, "correlation": {"type": "two_block", "alpha": 0.6, "beta": 0.6}})");
  CHECK(generate_instance(tb, 0, 0).correlation().matrix().isApprox(mat2(0.6, 0.4, 0.4, 0.6)));

  const ExperimentConfig dd =
      parse_config(R"({"N": 12, "correlation": {"type": "diagonally_dominant", "diag_min": 0.6}})");
  const CorrelationMatrix c = generate_correlation(dd);
  for (Index i = 0; i < 12; ++i) {
    CHECK(c(i, i) >= 0.6 - 1e-12);
    CHECK(c(i, i) < 1.0);
    CHECK(std::abs(c.matrix().row(i).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("instances are deterministic per (seed, grid, trial)") {
  const ExperimentConfig c = parse_config(R"({"N": 8})");
  const SystemInstance a = generate_instance(c, 2, 5);
  const SystemInstance b = generate_instance(c, 2, 5);
  CHECK(a.arrivals() == b.arrivals());
  CHECK(a.costs().d == b.costs().d);
  CHECK(generate_instance(c, 2, 6).arrivals() != a.arrivals());
  for (Index i = 0; i < 8; ++i) {
    CHECK(a.costs().d(i) >= 0.0);
    CHECK(a.costs().d(i) <= 1.0);
    CHECK(a.arrivals()(i) == std::floor(a.arrivals()(i)));
  }
}

TEST_CASE("zero mean load gives an idle system") {
  const ExperimentConfig c = parse_config(R"({"N": 5, "trials": 3, "mean_load_grid": [0]})");
  const SystemInstance inst = generate_instance(c, 0, 0);
  CHECK(inst.arrivals().isZero());
  const SweepResult r = run_sweep(c);
  for (const SummaryStats& s : r.summary) CHECK(s.mean == 0.0);
}

TEST_CASE("two-node file sweep: greedy leaves node b overloaded, dual stays feasible") {
  const std::string cfg = R"({"trials": 2, "mean_load_grid": [1.0], "arrivals": "constant",
    "correlation": {"type": "file", "path": "two_node.txt"}, "costs": {"d": 0.5}})";
  const ExperimentConfig c = parse_config(cfg, kData);
  CHECK(c.n == 2);
  const SweepResult r = run_sweep(c);
  for (const TrialResult& t : r.trials) {
    if (t.algorithm == Algorithm::Greedy) {
      CHECK(t.value == 1.0);
      CHECK(t.converged);
    } else {
      CHECK(std::isfinite(t.value));
    }
  }
}

TEST_CASE("light load on a strongly self-correlated system is always controllable") {
  const ExperimentConfig c = parse_config(R"({"N": 10, "trials": 10, "mean_load_grid": [0.1],
    "algorithms": ["greedy"], "correlation": {"type": "diagonally_dominant", "diag_min": 0.8}})");
  const CorrelationMatrix cm = generate_correlation(c);
  for (long t = 0; t < c.trials; ++t) {
    const SystemInstance inst = generate_instance(c, cm, 0, t);
    const auto in = stability_polytope_check(inst);
    const bool all = std::all_of(in.begin(), in.end(), [](bool b) { return b; });
    const TrialResult g = run_trial(c, inst, Algorithm::Greedy, 0, t);
    if (all) CHECK(g.value == 0.0);
  }
  const SweepResult r = run_sweep(c);
  CHECK(r.summary.at(0).mean == 0.0);
}

TEST_CASE("dual cost grows with load on fixed seeds") {
  const ExperimentConfig c = parse_config(R"({"N": 8, "trials": 5, "mean_load_grid": [0.5, 1, 2, 4],
    "algorithms": ["dual"], "dual": {"epsilon_relative": 1}})");
  const SweepResult r = run_sweep(c);
  for (std::size_t g = 1; g < r.summary.size(); ++g) CHECK(r.summary[g].mean >= r.summary[g - 1].mean);
}

TEST_CASE("feasible greedy implies feasible dual") {
  const ExperimentConfig c = parse_config(R"({"N": 6, "trials": 6, "mean_load_grid": [0.5, 2],
    "algorithms": ["dual", "greedy"], "dual": {"epsilon_relative": 1}})");
  const SweepResult r = run_sweep(c);
  for (const TrialResult& g : r.trials) {
    if (g.algorithm != Algorithm::Greedy || g.value != 0.0 || !g.converged) continue;
    for (const TrialResult& d : r.trials) {
      if (d.algorithm == Algorithm::Dual && d.grid_index == g.grid_index && d.trial == g.trial) {
        CHECK(std::isfinite(d.value));
      }
    }
  }
}

TEST_CASE("sweep output is reproducible byte for byte") {
  const ExperimentConfig c = parse_config(R"({"N": 5, "trials": 3, "mean_load_grid": [0.5, 2],
    "algorithms": "all", "dual": {"max_iters": 500}, "fastcontrol": {"mode": "sampled"}})");
  const std::string a = summary_csv(c);
  CHECK(a == summary_csv(c));
  CHECK(a.rfind("A_bar,algo,mean,std,n_trials,n_infeasible,seed\n", 0) == 0);
}

}
