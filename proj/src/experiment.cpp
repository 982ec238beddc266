#include "cdnlb/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "cdnlb/cost.hpp"
#include "cdnlb/io.hpp"
#include "json.hpp"

namespace cdnlb {

using nlohmann::json;

namespace {

std::seed_seq make_seed(std::uint64_t master, std::uint32_t a, std::uint32_t b, std::uint32_t tag) {
  return std::seed_seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32), a, b, tag};
}

constexpr std::uint32_t kCorrelationTag = 0xC0771A7E;
constexpr std::uint32_t kTrialTag = 0x7A1A1;

[[noreturn]] void bad_config(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

CorrelationSpec::Kind parse_kind(const std::string& s) {
  using K = CorrelationSpec::Kind;
  if (s == "identity") return K::Identity;
  if (s == "diagonally_dominant") return K::DiagonallyDominant;
  if (s == "uniform") return K::UniformRowStochastic;
  if (s == "two_block") return K::TwoBlock;
  if (s == "file") return K::FromFile;
  bad_config("unknown correlation type '" + s + "'");
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "dual") return Algorithm::Dual;
  if (s == "fastcontrol") return Algorithm::FastControl;
  if (s == "greedy") return Algorithm::Greedy;
  bad_config("unknown algorithm '" + s + "'");
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; })) {
      bad_config("unknown key '" + it.key() + "' in " + where);
    }
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Dual: return "dual";
    case Algorithm::FastControl: return "fastcontrol";
    case Algorithm::Greedy: return "greedy";
  }
  return "?";
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    const json doc = json::parse(json_text);
    check_keys(doc,
               {"N", "trials", "mean_load_grid", "seed", "algorithms", "correlation", "arrivals", "costs",
                "dual", "fastcontrol", "greedy", "raw_out"},
               "config");
    bool n_given = doc.contains("N");
    if (n_given) c.n = doc.at("N").get<Index>();
    read_opt(doc, "trials", c.trials);
    read_opt(doc, "mean_load_grid", c.mean_load_grid);
    read_opt(doc, "seed", c.seed);
    if (doc.contains("algorithms")) {
      const json& a = doc.at("algorithms");
      c.algorithms.clear();
      if (a.is_string() && a.get<std::string>() == "all") {
        c.algorithms = {Algorithm::Dual, Algorithm::FastControl, Algorithm::Greedy};
      } else if (a.is_string()) {
        c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
      } else {
        for (const auto& name : a) c.algorithms.push_back(parse_algorithm(name.get<std::string>()));
      }
    }
    if (doc.contains("correlation")) {
      const json& g = doc.at("correlation");
      check_keys(g, {"type", "diag_min", "popularity_sigma", "alpha", "beta", "path"}, "correlation");
      c.correlation.kind = parse_kind(g.at("type").get<std::string>());
      read_opt(g, "diag_min", c.correlation.diag_min);
      read_opt(g, "popularity_sigma", c.correlation.popularity_sigma);
      read_opt(g, "alpha", c.correlation.alpha);
      read_opt(g, "beta", c.correlation.beta);
      if (g.contains("path")) {
        std::filesystem::path p = g.at("path").get<std::string>();
        c.correlation.path = p.is_relative() ? base_dir / p : p;
      }
    }
    if (doc.contains("arrivals")) {
      const auto a = doc.at("arrivals").get<std::string>();
      if (a == "poisson") c.arrivals = ArrivalDistribution::Poisson;
      else if (a == "gamma") c.arrivals = ArrivalDistribution::Gamma;
      else if (a == "constant") c.arrivals = ArrivalDistribution::Constant;
      else bad_config("unknown arrival distribution '" + a + "'");
    }
    if (doc.contains("costs")) {
      const json& k = doc.at("costs");
      check_keys(k, {"eta", "theta", "gamma_cost", "capacity", "d"}, "costs");
      read_opt(k, "eta", c.eta);
      read_opt(k, "theta", c.theta);
      read_opt(k, "gamma_cost", c.gamma_cost);
      read_opt(k, "capacity", c.capacity);
      if (k.contains("d")) {
        const json& d = k.at("d");
        if (d.is_number()) {
          c.d_lo = c.d_hi = d.get<double>();
        } else {
          c.d_lo = d.at(0).get<double>();
          c.d_hi = d.at(1).get<double>();
        }
      }
    }
    if (doc.contains("dual")) {
      const json& d = doc.at("dual");
      check_keys(d, {"epsilon", "epsilon_relative", "max_iters", "stop_tol_relative"}, "dual");
      read_opt(d, "epsilon", c.epsilon);
      read_opt(d, "epsilon_relative", c.epsilon_relative);
      read_opt(d, "max_iters", c.max_iters);
      read_opt(d, "stop_tol_relative", c.stop_tol_relative);
    }
    if (doc.contains("fastcontrol")) {
      const json& f = doc.at("fastcontrol");
      check_keys(f, {"gamma", "mode", "scale"}, "fastcontrol");
      read_opt(f, "gamma", c.fc_gamma);
      read_opt(f, "scale", c.channel.scale);
      if (f.contains("mode")) {
        const auto m = f.at("mode").get<std::string>();
        if (m == "exact") c.channel.mode = AnycastChannel::Mode::ExactRate;
        else if (m == "sampled") c.channel.mode = AnycastChannel::Mode::SampledPackets;
        else bad_config("unknown channel mode '" + m + "'");
      }
    }
    if (doc.contains("greedy")) {
      const json& g = doc.at("greedy");
      check_keys(g, {"beta_sens", "dt", "horizon", "steady_tol", "clamp_eps", "x_tol", "s_tol"}, "greedy");
      read_opt(g, "beta_sens", c.ode.beta_sens);
      read_opt(g, "dt", c.ode.dt);
      read_opt(g, "horizon", c.ode.horizon);
      read_opt(g, "steady_tol", c.ode.steady_tol);
      read_opt(g, "clamp_eps", c.ode.clamp_eps);
      read_opt(g, "x_tol", c.x_tol);
      read_opt(g, "s_tol", c.s_tol);
    }
    if (doc.contains("raw_out")) {
      std::filesystem::path p = doc.at("raw_out").get<std::string>();
      c.raw_out = p.is_relative() ? base_dir / p : p;
    }
    if (c.correlation.kind == CorrelationSpec::Kind::FromFile) {
      if (c.correlation.path.empty()) bad_config("file correlation needs a path");
      const Index file_n = read_matrix_file(c.correlation.path).rows();
      if (n_given && file_n != c.n) {
        throw Error(ErrorCode::DimensionMismatch, "N does not match the correlation file");
      }
      c.n = file_n;
    }
  } catch (const json::exception& e) {
    bad_config(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

void validate(const ExperimentConfig& c) {
  if (c.n < 1) bad_config("N must be at least 1");
  if (c.trials < 1) bad_config("trials must be at least 1");
  if (c.mean_load_grid.empty()) bad_config("mean_load_grid is empty");
  for (double a : c.mean_load_grid) {
    if (!(a >= 0.0) || !std::isfinite(a)) bad_config("mean loads must be finite and nonnegative");
  }
  if (c.algorithms.empty()) bad_config("no algorithm selected");
  if (!(c.eta > 0.0 && c.theta > 0.0 && c.gamma_cost > 0.0 && c.capacity > 0.0)) {
    bad_config("eta, theta, gamma_cost and capacity must be positive");
  }
  if (!(c.d_lo >= 0.0 && c.d_lo <= c.d_hi)) bad_config("d range must satisfy 0 <= lo <= hi");
  if (!(c.epsilon > 0.0) || !(c.epsilon_relative >= 0.0)) bad_config("epsilon must be positive");
  if (c.max_iters < 1) bad_config("max_iters must be at least 1");
  if (!(c.stop_tol_relative >= 0.0)) bad_config("stop_tol_relative must be nonnegative");
  if (!(c.fc_gamma > 0.0) || !(c.channel.scale > 0.0)) bad_config("gamma and scale must be positive");
  validate(c.ode);
}

CorrelationMatrix generate_correlation(const ExperimentConfig& config) {
  using K = CorrelationSpec::Kind;
  const CorrelationSpec& g = config.correlation;
  const Index n = config.n;
  auto seq = make_seed(config.seed, 0, 0, kCorrelationTag);
  std::mt19937_64 rng(seq);

  switch (g.kind) {
    case K::Identity:
      return CorrelationMatrix::identity(n);

    case K::FromFile: {
      CorrelationMatrix c = validate_correlation(read_matrix_file(g.path));
      if (c.size() != n) throw Error(ErrorCode::DimensionMismatch, "correlation file size differs from N");
      return c;
    }

    case K::UniformRowStochastic: {
      std::exponential_distribution<double> e(1.0);
      Matrix m(n, n);
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) m(i, j) = e(rng);
      return normalize_rows(std::move(m));
    }

    case K::DiagonallyDominant: {
      if (!(g.diag_min >= 0.0 && g.diag_min < 1.0)) {
        throw Error(ErrorCode::GeneratorFailure, "diag_min must lie in [0, 1)", -1, -1, g.diag_min);
      }
      if (!(g.popularity_sigma >= 0.0)) {
        throw Error(ErrorCode::GeneratorFailure, "popularity_sigma must be nonnegative", -1, -1, g.popularity_sigma);
      }
      if (n == 1) return CorrelationMatrix::identity(1);
      std::lognormal_distribution<double> pop(0.0, g.popularity_sigma);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      Vector w(n);
      for (Index j = 0; j < n; ++j) w(j) = pop(rng);
      Matrix m(n, n);
      for (Index i = 0; i < n; ++i) {
        const double self = g.diag_min + (1.0 - g.diag_min) * u(rng);
        double mass = 0.0;
        for (Index j = 0; j < n; ++j) {
          m(i, j) = j == i ? 0.0 : w(j) * (1.0 - u(rng));
          mass += m(i, j);
        }
        for (Index j = 0; j < n; ++j) m(i, j) = j == i ? self : (1.0 - self) * m(i, j) / mass;
      }
      return normalize_rows(std::move(m));
    }

    case K::TwoBlock: {
      if (n < 2) throw Error(ErrorCode::GeneratorFailure, "two_block needs at least two nodes");
      if (!(g.alpha >= 0.0 && g.alpha <= 1.0 && g.beta >= 0.0 && g.beta <= 1.0)) {
        throw Error(ErrorCode::GeneratorFailure, "two_block self-correlations must lie in [0, 1]");
      }
      const Index n1 = (n + 1) / 2;
      const Index n2 = n - n1;
      Matrix m(n, n);
      for (Index i = 0; i < n; ++i) {
        const bool first = i < n1;
        const double own = first ? g.alpha : g.beta;
        for (Index j = 0; j < n; ++j) {
          const bool same = (j < n1) == first;
          const double size = static_cast<double>((j < n1) ? n1 : n2);
          m(i, j) = (same ? own : 1.0 - own) / size;
        }
      }
      return validate_correlation(m);
    }
  }
  throw Error(ErrorCode::GeneratorFailure, "unknown generator");
}

SystemInstance generate_instance(const ExperimentConfig& config, std::size_t grid_index, long trial) {
  return generate_instance(config, generate_correlation(config), grid_index, trial);
}

SystemInstance generate_instance(const ExperimentConfig& config, const CorrelationMatrix& c,
                                 std::size_t grid_index, long trial) {
  if (grid_index >= config.mean_load_grid.size()) throw Error(ErrorCode::OutOfRange, "grid index");
  const Index n = config.n;
  const double mean = config.mean_load_grid[grid_index];
  auto seq = make_seed(config.seed, static_cast<std::uint32_t>(grid_index),
                       static_cast<std::uint32_t>(trial), kTrialTag);
  std::mt19937_64 rng(seq);

  Vector a(n);
  for (Index i = 0; i < n; ++i) {
    if (mean == 0.0) {
      a(i) = 0.0;
    } else if (config.arrivals == ArrivalDistribution::Poisson) {
      a(i) = static_cast<double>(std::poisson_distribution<long>(mean)(rng));
    } else if (config.arrivals == ArrivalDistribution::Gamma) {
      a(i) = std::gamma_distribution<double>(mean, 1.0)(rng);
    } else {
      a(i) = mean;
    }
  }
  CostParams costs = CostParams::uniform(n, NodeCosts{config.eta, config.theta, 0.0, config.gamma_cost});
  std::uniform_real_distribution<double> ud(config.d_lo, config.d_hi);
  for (Index i = 0; i < n; ++i) costs.d(i) = config.d_lo == config.d_hi ? config.d_lo : ud(rng);
  return SystemInstance(c, std::move(a), Vector::Constant(n, config.capacity), std::move(costs));
}

TrialResult run_trial(const ExperimentConfig& config, const SystemInstance& inst, Algorithm algo,
                      std::size_t grid_index, long trial) {
  TrialResult r;
  r.grid_index = grid_index;
  r.mean_load = config.mean_load_grid.at(grid_index);
  r.trial = trial;
  r.algorithm = algo;

  if (algo == Algorithm::Greedy) {
    OdeConfig ode = config.ode;
    ode.record_stride = std::numeric_limits<long>::max();
    const Trajectory tr = integrate(inst, ode, ControlVector::Constant(inst.size(), 0.5));
    r.value = static_cast<double>(
        overloaded_nodes(tr.final_x(), tr.final_s(), inst.capacities(), config.x_tol, config.s_tol).size());
    r.effort = tr.t.back();
    r.converged = tr.converged;
    return r;
  }

  const double w0 = operating_cost(inst, ControlVector::Zero(inst.size()));
  const double eps = std::max(config.epsilon, config.epsilon_relative * w0);
  DualOptions opt;
  opt.max_iters = config.max_iters;
  opt.stop_tol = config.stop_tol_relative * std::max(w0, 1.0);
  opt.record_stride = 0;
  const StepSizePolicy policy = StepSizePolicy::for_epsilon(eps, inst);

  ConvergenceReport rep;
  if (algo == Algorithm::Dual) {
    rep = run_dual(inst, policy, opt);
  } else {
    ChannelConfig ch = config.channel;
    ch.seed = config.seed ^ (static_cast<std::uint64_t>(grid_index) << 40) ^ static_cast<std::uint64_t>(trial);
    rep = run_distributed(inst, policy, config.fc_gamma, opt, ch).dual;
  }
  r.value = rep.best_cost;
  r.effort = static_cast<double>(rep.iterations);
  r.converged = rep.converged;
  return r;
}

SummaryStats summarize(const std::vector<TrialResult>& results) {
  if (results.empty()) throw Error(ErrorCode::EmptyInput, "no trials to summarize");
  SummaryStats s;
  s.mean_load = results.front().mean_load;
  s.algorithm = results.front().algorithm;
  s.n_trials = static_cast<long>(results.size());
  double sum = 0.0;
  long finite = 0;
  for (const auto& r : results) {
    if (std::isinf(r.value)) {
      ++s.n_infeasible;
    } else {
      sum += r.value;
      ++finite;
    }
  }
  if (finite == 0) return s;
  s.mean = sum / static_cast<double>(finite);
  double ss = 0.0;
  for (const auto& r : results) {
    if (!std::isinf(r.value)) ss += (r.value - s.mean) * (r.value - s.mean);
  }
  s.std = finite > 1 ? std::sqrt(ss / static_cast<double>(finite - 1)) : 0.0;
  return s;
}

SweepResult run_sweep(const ExperimentConfig& config) {
  validate(config);
  const CorrelationMatrix c = generate_correlation(config);
  SweepResult out;
  for (std::size_t g = 0; g < config.mean_load_grid.size(); ++g) {
    std::vector<std::vector<TrialResult>> per_algo(config.algorithms.size());
    for (long t = 0; t < config.trials; ++t) {
      const SystemInstance inst = generate_instance(config, c, g, t);
      for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
        per_algo[a].push_back(run_trial(config, inst, config.algorithms[a], g, t));
      }
    }
    for (auto& rows : per_algo) {
      out.summary.push_back(summarize(rows));
      out.trials.insert(out.trials.end(), rows.begin(), rows.end());
    }
  }
  return out;
}

void write_summary_csv(std::ostream& out, const SweepResult& result, std::uint64_t seed) {
  out << "A_bar,algo,mean,std,n_trials,n_infeasible,seed\n";
  for (const auto& s : result.summary) {
    out << fmt(s.mean_load) << ',' << to_string(s.algorithm) << ',' << fmt(s.mean) << ',' << fmt(s.std) << ','
        << s.n_trials << ',' << s.n_infeasible << ',' << seed << '\n';
  }
}

void write_trials_csv(std::ostream& out, const SweepResult& result) {
  out << "A_bar,grid_index,trial,algo,value,effort,converged\n";
  for (const auto& r : result.trials) {
    out << fmt(r.mean_load) << ',' << r.grid_index << ',' << r.trial << ',' << to_string(r.algorithm) << ','
        << fmt(r.value) << ',' << fmt(r.effort) << ',' << (r.converged ? 1 : 0) << '\n';
  }
}

}  // namespace cdnlb
