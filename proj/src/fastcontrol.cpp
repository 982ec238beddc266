#include "cdnlb/fastcontrol.hpp"

#include <string>

#include "cdnlb/cost.hpp"

namespace cdnlb {

void RateMatrix::set_row(Index i, const std::vector<Rate>& row) {
  for (Index j = 0; j < n_; ++j) (*this)(i, j) = row[static_cast<std::size_t>(j)];
}

double RateMatrix::total() const {
  Rate sum = 0;
  for (const Rate r : r_) sum += r;
  return static_cast<double>(sum);
}

void validate_fastcontrol(const CorrelationMatrix& c) {
  for (Index i = 0; i < c.size(); ++i) {
    for (Index j = 0; j < c.size(); ++j) {
      if (c(i, j) == 0.0 && c(j, i) > 0.0) {
        throw Error(ErrorCode::UnreachableCategory,
                    "node " + std::to_string(i) + " cannot reach category " + std::to_string(j), i, j);
      }
    }
  }
}

std::vector<Rate> generation_rates(double mu_i, const Vector& row_i, const Vector& col_i,
                                   double gamma, Index id) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::NonPositiveInput, "gamma must be positive", -1, -1, gamma);
  if (row_i.size() != col_i.size()) throw Error(ErrorCode::DimensionMismatch, "row and column lengths differ");
  std::vector<Rate> r(static_cast<std::size_t>(row_i.size()), Rate(0));
  const Rate scaled = static_cast<Rate>(gamma) * static_cast<Rate>(mu_i);
  for (Index j = 0; j < row_i.size(); ++j) {
    if (row_i(j) > 0.0) {
      r[static_cast<std::size_t>(j)] = scaled * static_cast<Rate>(col_i(j)) / static_cast<Rate>(row_i(j));
    } else if (col_i(j) > 0.0) {
      throw Error(ErrorCode::UnreachableCategory,
                  "category " + std::to_string(j) + " unreachable", id, j);
    }
  }
  return r;
}

double recover_beta(Rate reception, double gamma) {
  return static_cast<double>(reception / static_cast<Rate>(gamma));
}

AnycastChannel AnycastChannel::exact() { return AnycastChannel(Mode::ExactRate, 1.0, 0); }

AnycastChannel AnycastChannel::sampled(double scale, std::uint64_t seed) {
  if (!(scale > 0.0)) throw Error(ErrorCode::NonPositiveInput, "scale must be positive", -1, -1, scale);
  return AnycastChannel(Mode::SampledPackets, scale, seed);
}

std::vector<Rate> AnycastChannel::deliver(const RateMatrix& rates, const CorrelationMatrix& c) {
  const Index n = c.size();
  std::vector<Rate> recv(static_cast<std::size_t>(n), Rate(0));
  for (Index i = 0; i < n; ++i) {
    Rate sum = 0;
    for (Index j = 0; j < n; ++j) {
      const Rate mean = rates(j, i) * static_cast<Rate>(c(j, i));
      if (mode_ == Mode::ExactRate) {
        sum += mean;
      } else if (mean > 0) {
        std::poisson_distribution<long long> packets(static_cast<double>(mean) * scale_);
        sum += static_cast<Rate>(packets(rng_)) / static_cast<Rate>(scale_);
      }
    }
    recv[static_cast<std::size_t>(i)] = sum;
  }
  return recv;
}

LoadVector AnycastChannel::carry_data(const CorrelationMatrix& c, const Vector& arrivals,
                                      const ControlVector& x) const {
  return load_map(c, arrivals, x);
}

LocalKnowledge local_knowledge(const SystemInstance& instance, Index i, double gamma,
                               const StepSizePolicy& policy) {
  const Matrix& m = instance.correlation().matrix();
  LocalKnowledge k;
  k.id = i;
  k.arrival = instance.arrivals()(i);
  k.capacity = instance.capacities()(i);
  k.costs = instance.costs().node(i);
  k.row = m.row(i).transpose();
  k.col = m.col(i);
  k.gamma = gamma;
  k.policy = policy;
  return k;
}

NodeAgent::NodeAgent(LocalKnowledge knowledge) : k_(std::move(knowledge)) {
  generation_rates(0.0, k_.row, k_.col, k_.gamma, k_.id);
}

std::vector<Rate> NodeAgent::emit() const { return generation_rates(mu_, k_.row, k_.col, k_.gamma, k_.id); }

double NodeAgent::respond(const LocalObservation& obs) {
  beta_ = recover_beta(obs.reception, k_.gamma);
  x_ = solve_sub_x(k_.costs, obs.arrival, beta_);
  s_ = solve_sub_S(k_.costs.eta, k_.capacity, mu_);
  return x_;
}

void NodeAgent::update(const LocalObservation& obs) {
  mu_ = dual_update(mu_, k_.policy.at(round_), obs.observed_load, s_);
  log_.push_back(obs);
  ++round_;
}

DistributedReport run_distributed(const SystemInstance& instance, const StepSizePolicy& policy,
                                  double gamma, const DualOptions& options,
                                  const ChannelConfig& channel_config) {
  const CorrelationMatrix& c = instance.correlation();
  validate_fastcontrol(c);
  const Index n = instance.size();

  std::vector<NodeAgent> agents;
  agents.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) agents.emplace_back(local_knowledge(instance, i, gamma, policy));

  AnycastChannel channel = channel_config.mode == AnycastChannel::Mode::ExactRate
                               ? AnycastChannel::exact()
                               : AnycastChannel::sampled(channel_config.scale, channel_config.seed);

  DistributedReport out;
  ConvergenceTracker tracker(instance, options);
  DualState state = cold_start(instance);
  RateMatrix rates(n);

  for (long k = 0; k < options.max_iters; ++k) {
    for (Index i = 0; i < n; ++i) rates.set_row(i, agents[i].emit());
    const double overhead = rates.total();
    const std::vector<Rate> recv = channel.deliver(rates, c);

    std::vector<LocalObservation> obs(static_cast<std::size_t>(n));
    DualState next;
    next.x.resize(n);
    next.s.resize(n);
    for (Index i = 0; i < n; ++i) {
      obs[i].arrival = instance.arrivals()(i);
      obs[i].reception = recv[i];
      next.x(i) = agents[i].respond(obs[i]);
      next.s(i) = agents[i].s();
    }
    next.s_obs = channel.carry_data(c, instance.arrivals(), next.x);
    next.mu.resize(n);
    for (Index i = 0; i < n; ++i) {
      obs[i].observed_load = next.s_obs(i);
      agents[i].update(obs[i]);
      next.mu(i) = agents[i].mu();
    }
    next.k = k + 1;

    out.total_overhead += overhead;
    const std::size_t before = tracker.recorded();
    const bool stop = tracker.observe(state.mu, next);
    if (tracker.recorded() > before) {
      Vector r(n);
      for (Index i = 0; i < n; ++i) r(i) = static_cast<double>(recv[i]);
      out.reception.push_back(std::move(r));
      out.overhead.push_back(overhead);
    }
    state = std::move(next);
    if (stop) break;
  }
  out.dual = std::move(tracker).finish(std::move(state));
  return out;
}

}  // namespace cdnlb
