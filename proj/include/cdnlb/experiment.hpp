#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "cdnlb/fastcontrol.hpp"
#include "cdnlb/greedy.hpp"

namespace cdnlb {

struct CorrelationSpec {
  enum class Kind { Identity, DiagonallyDominant, UniformRowStochastic, TwoBlock, FromFile };
  Kind kind = Kind::DiagonallyDominant;
  double diag_min = 0.6;
  /// Lognormal spread of how strongly each node attracts foreign traffic.
  double popularity_sigma = 1.0;
  double alpha = 0.6;
  double beta = 0.6;
  std::filesystem::path path;
};

enum class ArrivalDistribution { Poisson, Gamma, Constant };

enum class Algorithm { Dual, FastControl, Greedy };
std::string to_string(Algorithm a);

struct ExperimentConfig {
  Index n = 60;
  long trials = 100;
  std::vector<double> mean_load_grid{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::uint64_t seed = 20240601;
  std::vector<Algorithm> algorithms{Algorithm::Dual, Algorithm::Greedy};

  CorrelationSpec correlation;
  ArrivalDistribution arrivals = ArrivalDistribution::Poisson;

  double eta = 1.0;
  double theta = 10.0;
  double gamma_cost = 1.0;
  double capacity = 0.7;
  /// d_i ~ U[d_lo, d_hi].
  double d_lo = 0.0;
  double d_hi = 1.0;

  /// The dual accuracy target is max(epsilon, epsilon_relative * W(0)),
  /// with W(0) the cost of offloading everything.
  double epsilon = 0.1;
  double epsilon_relative = 0.0;
  long max_iters = 20000;
  /// Window stopping threshold, relative to max(W(0), 1). Zero disables.
  double stop_tol_relative = 0.0;

  double fc_gamma = 1.0;
  ChannelConfig channel;

  OdeConfig ode;
  double x_tol = 1e-3;
  double s_tol = 1e-6;

  /// Optional per-trial CSV written next to the summary.
  std::filesystem::path raw_out;
};

/// Parses the sweep config (JSON). Missing keys keep their defaults;
/// relative paths resolve against base_dir. Throws InvalidConfig.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& config);

/// The correlation matrix shared by every trial of a sweep, drawn from the
/// master seed. Throws GeneratorFailure for impossible parameters.
CorrelationMatrix generate_correlation(const ExperimentConfig& config);

/// Instance for one trial at one grid point. Deterministic in
/// (seed, grid_index, trial).
SystemInstance generate_instance(const ExperimentConfig& config, std::size_t grid_index, long trial);
SystemInstance generate_instance(const ExperimentConfig& config, const CorrelationMatrix& c,
                                 std::size_t grid_index, long trial);

struct TrialResult {
  std::size_t grid_index = 0;
  double mean_load = 0.0;
  long trial = 0;
  Algorithm algorithm = Algorithm::Dual;
  /// Best primal cost for dual and fastcontrol, overloaded-node count for greedy.
  double value = 0.0;
  /// Dual iterations, or greedy time to steady state.
  double effort = 0.0;
  bool converged = false;
};

TrialResult run_trial(const ExperimentConfig& config, const SystemInstance& instance,
                      Algorithm algorithm, std::size_t grid_index, long trial);

struct SummaryStats {
  double mean_load = 0.0;
  Algorithm algorithm = Algorithm::Dual;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = 0.0;
  long n_trials = 0;
  long n_infeasible = 0;
};

/// Sample mean and unbiased standard deviation over finite values; infinite
/// values are counted in n_infeasible. A single finite value has std 0.
/// Throws EmptyInput.
SummaryStats summarize(const std::vector<TrialResult>& results);

struct SweepResult {
  std::vector<SummaryStats> summary;
  std::vector<TrialResult> trials;
};

SweepResult run_sweep(const ExperimentConfig& config);

/// Columns: A_bar,algo,mean,std,n_trials,n_infeasible,seed
void write_summary_csv(std::ostream& out, const SweepResult& result, std::uint64_t seed);
/// Columns: A_bar,grid_index,trial,algo,value,effort,converged
void write_trials_csv(std::ostream& out, const SweepResult& result);

}  // namespace cdnlb
