// cdnlb: command-line front end for the load-management library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "cdnlb/cost.hpp"
#include "cdnlb/dual.hpp"
#include "cdnlb/experiment.hpp"
#include "cdnlb/fastcontrol.hpp"
#include "cdnlb/greedy.hpp"
#include "cdnlb/io.hpp"
#include "json.hpp"

namespace {

using namespace cdnlb;

// "-" or empty means stdout.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw Error(ErrorCode::Io, "cannot write " + path);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void write_indexed(std::ostream& out, const char* prefix, Index n) {
  for (Index i = 0; i < n; ++i) out << ',' << prefix << i;
}

void write_values(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << ',' << v(i);
}

void write_dual_header(std::ostream& out, Index n) {
  out << "k,cost,dual_obj,grad_norm";
  write_indexed(out, "mu_", n);
  write_indexed(out, "x_", n);
}

void write_dual_row(std::ostream& out, const DualRecord& r) {
  out << r.k << ',' << r.cost << ',' << r.dual_obj << ',' << r.grad_norm;
  write_values(out, r.mu);
  write_values(out, r.x);
}

void print_dual_summary(const ConvergenceReport& rep) {
  std::fprintf(stderr, "iterations %ld  converged %s  best cost %.10g (k=%ld)  best dual %.10g  bound violations %ld\n",
               rep.iterations, rep.converged ? "yes" : "no", rep.best_cost, rep.best_k, rep.best_dual,
               rep.bound_violations);
}

struct DualArgs {
  std::string instance;
  double epsilon = 0.1;
  long max_iters = 20000;
  double stop_tol = 0.0;
  long stride = 1;
  std::string out = "-";
};

void add_dual_flags(CLI::App* cmd, DualArgs& a) {
  cmd->add_option("--instance", a.instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--epsilon", a.epsilon, "Accuracy target for the constant step size")->capture_default_str();
  cmd->add_option("--max-iters", a.max_iters, "Iteration cap")->capture_default_str();
  cmd->add_option("--stop-tol", a.stop_tol, "Best-cost change over 100 iterations that stops the run (0: off)")
      ->capture_default_str();
  cmd->add_option("--stride", a.stride, "Write every n-th iteration")->capture_default_str();
  cmd->add_option("--out", a.out, "CSV path, - for stdout")->capture_default_str();
}

DualOptions dual_options(const DualArgs& a) {
  DualOptions o;
  o.max_iters = a.max_iters;
  o.stop_tol = a.stop_tol;
  o.record_stride = a.stride;
  return o;
}

int run_dual_cmd(const DualArgs& a) {
  const SystemInstance inst = load_instance(a.instance);
  const ConvergenceReport rep = run_dual(inst, StepSizePolicy::for_epsilon(a.epsilon, inst), dual_options(a));
  Output out(a.out);
  std::ostream& os = out.stream();
  os.precision(17);
  write_dual_header(os, inst.size());
  os << '\n';
  for (const auto& r : rep.trajectory) {
    write_dual_row(os, r);
    os << '\n';
  }
  print_dual_summary(rep);
  return 0;
}

struct FastControlArgs {
  DualArgs dual;
  double gamma = 1.0;
  std::string mode = "exact";
  double scale = 1e6;
  std::uint64_t seed = 1;
};

int run_fastcontrol_cmd(const FastControlArgs& a) {
  const SystemInstance inst = load_instance(a.dual.instance);
  ChannelConfig ch;
  ch.mode = a.mode == "exact" ? AnycastChannel::Mode::ExactRate : AnycastChannel::Mode::SampledPackets;
  ch.scale = a.scale;
  ch.seed = a.seed;
  const DistributedReport rep =
      run_distributed(inst, StepSizePolicy::for_epsilon(a.dual.epsilon, inst), a.gamma, dual_options(a.dual), ch);
  Output out(a.dual.out);
  std::ostream& os = out.stream();
  os.precision(17);
  write_dual_header(os, inst.size());
  write_indexed(os, "R_", inst.size());
  os << ",overhead\n";
  for (std::size_t k = 0; k < rep.dual.trajectory.size(); ++k) {
    write_dual_row(os, rep.dual.trajectory[k]);
    write_values(os, rep.reception[k]);
    os << ',' << rep.overhead[k] << '\n';
  }
  print_dual_summary(rep.dual);
  std::fprintf(stderr, "total overhead %.10g\n", rep.total_overhead);
  return 0;
}

struct GreedyArgs {
  std::string instance;
  std::string x0 = "0.5";
  double dt = 0.01;
  double horizon = 1e4;
  double beta_sens = 1.0;
  std::uint64_t seed = 1;
  long stride = 1;
  std::string out = "-";
};

int run_greedy_cmd(const GreedyArgs& a) {
  const SystemInstance inst = load_instance(a.instance);
  const Index n = inst.size();
  ControlVector x0(n);
  if (a.x0 == "random") {
    std::mt19937_64 rng(a.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index i = 0; i < n; ++i) {
      do x0(i) = u(rng);
      while (x0(i) == 0.0);
    }
  } else {
    const Vector v = parse_vector_list(a.x0);
    if (v.size() == 1) x0.setConstant(v(0));
    else if (v.size() == n) x0 = v;
    else throw Error(ErrorCode::DimensionMismatch, "--x0 needs 1 or N values");
  }
  OdeConfig cfg;
  cfg.dt = a.dt;
  cfg.horizon = a.horizon;
  cfg.beta_sens = a.beta_sens;
  cfg.record_stride = a.stride;
  const Trajectory tr = integrate(inst, cfg, x0);

  Output out(a.out);
  std::ostream& os = out.stream();
  os.precision(17);
  os << 't';
  write_indexed(os, "x_", n);
  write_indexed(os, "S_", n);
  os << '\n';
  for (std::size_t k = 0; k < tr.t.size(); ++k) {
    os << tr.t[k];
    write_values(os, tr.x[k]);
    write_values(os, tr.s[k]);
    os << '\n';
  }
  std::fprintf(stderr, "t_end %.6g  converged %s  residual %.3g  overloaded:", tr.t.back(),
               tr.converged ? "yes" : "no", tr.residual);
  for (Index i : overloaded_nodes(tr.final_x(), tr.final_s(), inst.capacities())) std::fprintf(stderr, " %ld", static_cast<long>(i));
  std::fprintf(stderr, "\n");
  return 0;
}

nlohmann::json fixed_point_json(const FixedPointReport& fp) {
  nlohmann::json eig = nlohmann::json::array();
  for (const auto& l : fp.eigenvalues) eig.push_back({l.real(), l.imag()});
  return {{"x", std::vector<double>(fp.x.data(), fp.x.data() + fp.x.size())},
          {"S", std::vector<double>(fp.s.data(), fp.s.data() + fp.s.size())},
          {"residual", fp.residual},
          {"eigenvalues", eig},
          {"classification", to_string(fp.classification)}};
}

int run_stability_cmd(const std::string& path, bool as_json) {
  const SystemInstance inst = load_instance(path);
  const StabilityVerdict v = analyze_stability(inst);
  const Index n = inst.size();

  nlohmann::json two_node;
  if (n == 2) {
    const std::array<Index, 1> g1{0}, g2{1};
    const auto [alpha, beta] = effective_self_correlation(inst.correlation(), g1, g2);
    try {
      const TwoNodeReport r = two_node_classify(alpha, beta, {inst.arrivals()(0), inst.arrivals()(1)},
                                                {inst.capacities()(0), inst.capacities()(1)});
      two_node = {{"alpha", alpha}, {"beta", beta}, {"verdict", to_string(r.verdict)}};
    } catch (const Error& e) {
      two_node = {{"alpha", alpha}, {"beta", beta}, {"error", e.what()}};
    }
  }

  if (as_json) {
    nlohmann::json doc;
    doc["in_polytope"] = v.in_polytope;
    doc["uncontrollably_overloaded"] = v.uncontrollably_overloaded;
    doc["all_in_polytope"] = v.all_in_polytope;
    doc["locally_controllable"] = v.locally_controllable;
    doc["fixed_points"] = nlohmann::json::array();
    for (const auto& fp : v.fixed_points) doc["fixed_points"].push_back(fixed_point_json(fp));
    if (n == 2) doc["two_node"] = two_node;
    std::cout << doc.dump(2) << '\n';
    return 0;
  }

  std::printf("%-6s %-12s %-14s %-12s\n", "node", "in_polytope", "inflow", "capacity");
  const Matrix& c = inst.correlation().matrix();
  for (Index i = 0; i < n; ++i) {
    double inflow = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (j != i) inflow += c(j, i) * inst.arrivals()(j);
    }
    std::printf("%-6ld %-12s %-14.6g %-12.6g\n", static_cast<long>(i), v.in_polytope[i] ? "yes" : "no", inflow,
                inst.capacities()(i));
  }
  std::printf("\nfixed points (%zu)\n", v.fixed_points.size());
  for (const auto& fp : v.fixed_points) {
    std::ostringstream xs, ss, es;
    xs.precision(4);
    ss.precision(4);
    es.precision(4);
    for (Index i = 0; i < n; ++i) {
      xs << (i ? " " : "") << fp.x(i);
      ss << (i ? " " : "") << fp.s(i);
    }
    for (const auto& l : fp.eigenvalues) {
      es << ' ' << l.real();
      if (l.imag() != 0.0) es << (l.imag() > 0 ? "+" : "") << l.imag() << 'i';
    }
    std::printf("  x=[%s] S=[%s] %-9s eig:%s\n", xs.str().c_str(), ss.str().c_str(),
                to_string(fp.classification).c_str(), es.str().c_str());
  }
  std::printf("\nall in polytope: %s\nlocally controllable: %s\n", v.all_in_polytope ? "yes" : "no",
              v.locally_controllable ? "yes" : "no");
  if (n == 2) {
    std::printf("two-node (alpha=%.6g, beta=%.6g): %s\n", two_node["alpha"].get<double>(),
                two_node["beta"].get<double>(),
                two_node.contains("verdict") ? two_node["verdict"].get<std::string>().c_str()
                                             : two_node["error"].get<std::string>().c_str());
  }
  for (Index i = 0; i < n; ++i) {
    if (v.uncontrollably_overloaded[i]) std::printf("node %ld can be left in uncontrollable overload\n", static_cast<long>(i));
  }
  return 0;
}

int run_sweep_cmd(const std::string& config_path, const std::string& out_path, const std::string& raw_path) {
  ExperimentConfig cfg = load_config(config_path);
  if (!raw_path.empty()) cfg.raw_out = raw_path;
  const SweepResult res = run_sweep(cfg);
  Output out(out_path);
  write_summary_csv(out.stream(), res, cfg.seed);
  if (!cfg.raw_out.empty()) {
    Output raw(cfg.raw_out.string());
    write_trials_csv(raw.stream(), res);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Load management for two-layer anycast CDNs"};
  app.require_subcommand(1);

  DualArgs dual;
  add_dual_flags(app.add_subcommand("dual", "Centralized dual super-gradient iteration"), dual);

  FastControlArgs fc;
  auto* fc_cmd = app.add_subcommand("fastcontrol", "Distributed dual algorithm over FastControl packets");
  add_dual_flags(fc_cmd, fc.dual);
  fc_cmd->add_option("--gamma", fc.gamma, "Packet rate scale")->capture_default_str();
  fc_cmd->add_option("--mode", fc.mode, "Channel fidelity")->check(CLI::IsMember({"exact", "sampled"}))->capture_default_str();
  fc_cmd->add_option("--scale", fc.scale, "Packets per unit rate in sampled mode")->capture_default_str();
  fc_cmd->add_option("--seed", fc.seed, "Sampling seed")->capture_default_str();

  GreedyArgs greedy;
  auto* g_cmd = app.add_subcommand("greedy", "Integrate the greedy redirection dynamics");
  g_cmd->add_option("--instance", greedy.instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  g_cmd->add_option("--x0", greedy.x0, "Start: one value, N comma-separated values, or 'random'")->capture_default_str();
  g_cmd->add_option("--dt", greedy.dt, "RK4 step")->capture_default_str();
  g_cmd->add_option("--horizon", greedy.horizon, "Maximum integration time")->capture_default_str();
  g_cmd->add_option("--beta-sens", greedy.beta_sens, "Sensitivity of the control law")->capture_default_str();
  g_cmd->add_option("--seed", greedy.seed, "Seed for --x0 random")->capture_default_str();
  g_cmd->add_option("--stride", greedy.stride, "Write every n-th step")->capture_default_str();
  g_cmd->add_option("--out", greedy.out, "CSV path, - for stdout")->capture_default_str();

  std::string stab_instance;
  bool stab_json = false;
  auto* s_cmd = app.add_subcommand("stability", "Polytope check, fixed points and verdicts");
  s_cmd->add_option("--instance", stab_instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  s_cmd->add_flag("--json", stab_json, "Machine-readable output");

  std::string sweep_config;
  std::string sweep_out = "-";
  std::string sweep_raw;
  auto* w_cmd = app.add_subcommand("sweep", "Monte Carlo sweep over mean arrival rates");
  w_cmd->add_option("--config", sweep_config, "Sweep config JSON")->required()->check(CLI::ExistingFile);
  w_cmd->add_option("--out", sweep_out, "Summary CSV path, - for stdout")->capture_default_str();
  w_cmd->add_option("--raw", sweep_raw, "Per-trial CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("dual")) return run_dual_cmd(dual);
    if (app.got_subcommand("fastcontrol")) return run_fastcontrol_cmd(fc);
    if (app.got_subcommand("greedy")) return run_greedy_cmd(greedy);
    if (app.got_subcommand("stability")) return run_stability_cmd(stab_instance, stab_json);
    if (app.got_subcommand("sweep")) return run_sweep_cmd(sweep_config, sweep_out, sweep_raw);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
