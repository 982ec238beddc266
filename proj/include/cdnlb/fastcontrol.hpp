#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cdnlb/dual.hpp"

namespace cdnlb {

/// Control-plane rates are carried in extended precision so that the
/// recovered coupling factor rounds to the same double as the centrally
/// computed one.
#if defined(__SIZEOF_FLOAT128__)
using Rate = __float128;
#else
using Rate = long double;
#endif

/// r(i, j): rate of category-j packets forced by node i. Dense, row-major.
class RateMatrix {
 public:
  explicit RateMatrix(Index n) : n_(n), r_(static_cast<std::size_t>(n * n), Rate(0)) {}
  Index size() const noexcept { return n_; }
  Rate& operator()(Index i, Index j) { return r_[static_cast<std::size_t>(i * n_ + j)]; }
  Rate operator()(Index i, Index j) const { return r_[static_cast<std::size_t>(i * n_ + j)]; }
  void set_row(Index i, const std::vector<Rate>& row);
  /// Sum of all generation rates, the control overhead of one round.
  double total() const;

 private:
  Index n_;
  std::vector<Rate> r_;
};

/// Throws UnreachableCategory(i, j) for the first pair with C(i, j) = 0 and
/// C(j, i) > 0: node i cannot deliver the term it owes to node j.
void validate_fastcontrol(const CorrelationMatrix& c);

/// r_ij = gamma mu_i C(j, i) / C(i, j) for C(i, j) > 0, and 0 when both
/// entries vanish. `id` only labels errors.
std::vector<Rate> generation_rates(double mu_i, const Vector& row_i, const Vector& col_i,
                                   double gamma, Index id = -1);

/// beta_i = R_i / gamma, rounded once to double.
double recover_beta(Rate reception, double gamma);
inline double recover_beta(double reception, double gamma) {
  return recover_beta(static_cast<Rate>(reception), gamma);
}

class AnycastChannel {
 public:
  enum class Mode { ExactRate, SampledPackets };

  static AnycastChannel exact();
  /// Each (i, j) stream is observed as Poisson(r_ij C_ij scale) / scale.
  static AnycastChannel sampled(double scale, std::uint64_t seed);

  Mode mode() const noexcept { return mode_; }
  double scale() const noexcept { return scale_; }

  /// Reception rates R_i = sum_j r(j, i) C(j, i) of each node's own category.
  std::vector<Rate> deliver(const RateMatrix& rates, const CorrelationMatrix& c);

  /// Data-plane traffic: proxy loads for the DNS answers x. Control packets
  /// do not add to these loads.
  LoadVector carry_data(const CorrelationMatrix& c, const Vector& arrivals,
                        const ControlVector& x) const;

 private:
  AnycastChannel(Mode mode, double scale, std::uint64_t seed)
      : mode_(mode), scale_(scale), rng_(seed) {}

  Mode mode_;
  double scale_;
  std::mt19937_64 rng_;
};

/// Everything an agent may know about the system: its own parameters and
/// the i-th row and column of C.
struct LocalKnowledge {
  Index id = 0;
  double arrival = 0.0;
  double capacity = 0.0;
  NodeCosts costs;
  Vector row;
  Vector col;
  double gamma = 1.0;
  StepSizePolicy policy;
};

LocalKnowledge local_knowledge(const SystemInstance& instance, Index i, double gamma,
                               const StepSizePolicy& policy);

/// What a node monitors in one round.
struct LocalObservation {
  double arrival = 0.0;
  double observed_load = 0.0;
  Rate reception = 0;
};

/// One node of the distributed dual algorithm. Its only inputs after
/// construction are LocalObservation records.
class NodeAgent {
 public:
  explicit NodeAgent(LocalKnowledge knowledge);

  /// Rates this node forces for the current multiplier.
  std::vector<Rate> emit() const;

  /// Control phase: recover beta from the reception rate and solve both
  /// subproblems. Returns the DNS answer probability x_i.
  double respond(const LocalObservation& obs);

  /// Data phase: take the observed proxy load and update the multiplier.
  void update(const LocalObservation& obs);

  Index id() const noexcept { return k_.id; }
  double mu() const noexcept { return mu_; }
  double x() const noexcept { return x_; }
  double s() const noexcept { return s_; }
  double beta() const noexcept { return beta_; }
  long round() const noexcept { return round_; }
  const std::vector<LocalObservation>& log() const noexcept { return log_; }

 private:
  LocalKnowledge k_;
  double mu_ = 0.0;
  double x_ = 0.0;
  double s_ = 0.0;
  double beta_ = 0.0;
  long round_ = 0;
  std::vector<LocalObservation> log_;
};

struct ChannelConfig {
  AnycastChannel::Mode mode = AnycastChannel::Mode::ExactRate;
  double scale = 1e6;
  std::uint64_t seed = 1;
};

struct DistributedReport {
  ConvergenceReport dual;
  /// Reception rates and per-round overhead, aligned with dual.trajectory.
  std::vector<Vector> reception;
  std::vector<double> overhead;
  double total_overhead = 0.0;
};

/// Synchronous rounds of the agents over an anycast channel, from mu = 0.
DistributedReport run_distributed(const SystemInstance& instance, const StepSizePolicy& policy,
                                  double gamma, const DualOptions& options = {},
                                  const ChannelConfig& channel = {});

}  // namespace cdnlb
