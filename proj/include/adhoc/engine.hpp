#pragma once

#include "adhoc/adversary.hpp"
#include "adhoc/mac.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace adhoc {

class ConfigInvalid : public std::runtime_error {
 public:
  ConfigInvalid(const std::string& field, const std::string& problem)
      : std::runtime_error(field + ": " + problem), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Scenario {
  std::string name{"scenario"};
  int n{0};
  NodeSet bad;
  std::vector<AffineClock> clocks;  // index i-1
  ClockParams clock;                // a_max, u0, quantum, k_delay; eps_a and eps_b are derived
  Rational packet{1};               // W, reference units
  RateModel model;
  UtilitySpec utility;
  std::string adversary{"AlwaysConform"};
  StrategySettings strategy;
  double eps{0.25};
  std::optional<ProtocolParams> params;
  std::uint64_t seed{1};

  NodeSet good() const;
  /// Throws ConfigInvalid naming the first offending field, or
  /// AssumptionCViolated when the good nodes are not bidirectionally connected.
  void validate() const;
};

/// Seeded clocks within the bounds: skews in [1, a_max] and offsets skew * s
/// for a turn-on lead s in [0, U0], both on a grid of `steps` points, so every
/// pair satisfies |b_ij| <= a_max U0.
std::vector<AffineClock> seeded_clocks(int n, const ClockParams& params, std::uint64_t seed, int steps = 64);

// -- channel ----------------------------------------------------------------

struct Transmission {
  NodeId from{0};
  NodeId to{0};
};

struct ChannelOutcome {
  RateMatrix realized;  // rates the channel actually carries
  std::vector<Transmission> delivered;
  std::vector<Transmission> lost;
};

/// Rates realized for catalogue entry `ctv` while the nodes in `jamming` jam
/// alongside their nominal modes. `transmitting` lists the senders that
/// actually put a packet on the air; a scheduled link delivers iff its
/// sender transmitted, its receiver listens, and the realized rate reaches
/// the claimed one.
ChannelOutcome resolve_channel(const RateModel& model, std::size_t ctv, const NodeSet& jamming,
                               const NodeSet& transmitting, const RateMatrix& claimed);

// -- events and outputs -------------------------------------------------------

struct TraceRecord {
  static constexpr int kSchema = 1;
  Time t{0};
  NodeId node{0};
  std::string phase;
  std::string kind;
  std::string outcome;
  std::string digest;

  std::string json_line() const;
};

/// Discrete event ordered by (time, sequence).
struct Event {
  Time time{0};
  std::uint64_t seq{0};
  NodeId target{0};
  std::size_t payload{0};  // index into the caller's event data

  friend bool operator>(const Event& a, const Event& b) {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

class EventQueue {
 public:
  void push(Time t, NodeId target, std::size_t payload) { q_.push({std::move(t), next_++, target, payload}); }
  bool empty() const { return q_.empty(); }
  Event pop() {
    Event e = q_.top();
    q_.pop();
    return e;
  }

 private:
  std::priority_queue<Event, std::vector<Event>, std::greater<>> q_;
  std::uint64_t next_{0};
};

struct PruneStep {
  int iteration{0};
  std::vector<std::size_t> failed;
  std::size_t remaining{0};
};

struct Metrics {
  std::string scenario;
  std::string adversary;
  std::uint64_t seed{0};
  ProtocolParams params;
  Rational quantum{0};
  Rational eps_a{0};
  Rational eps_b{0};
  Rational start{0};
  Rational k_delay{0};

  // discovery
  std::size_t deliveries{0};
  std::size_t cross_stage{0};
  std::size_t missed_windows{0};
  std::size_t stages{0};
  Rational discovery_end{0};  // local counts
  double steady_start{0};     // reference-estimate units
  std::map<NodeId, NodeSet> neighbors;
  std::vector<NodePair> links_decided;
  std::vector<NodePair> removed_two_cycles;
  std::vector<Cycle> checked_cycles;
  std::vector<NodePair> removed_by_check;
  std::vector<NodePair> links_final;
  bool views_agree{true};

  // steady state
  NodeSet component;
  std::vector<PruneStep> prune_history;
  std::vector<std::size_t> feasible_initial;
  std::vector<std::size_t> feasible_final;
  std::size_t failure_records{0};
  std::size_t timing_violations{0};
  bool schedules_agree{true};
  Matrix<double> throughput;  // long run, per ordered pair
  double utility_long_run{0};
  double utility_steady{0};  // mean over iterations of per-iteration utility
  double utility_final_iteration{0};
  double lp_final{0};  // LP value of the final feasible set on claimed rates
  double overhead_fraction{0};
  double lifetime{0};

  std::string to_json() const;
};

struct RunResult {
  Metrics metrics;
  std::vector<TraceRecord> trace;

  std::string trace_jsonl() const;
};

/// Fine-grained knobs for tests and sweeps.
struct EngineOptions {
  /// Stop after neighbor discovery (stage containment sweeps).
  bool neighbor_discovery_only{false};
  /// Cap on simulated iterations; the rest of the lifetime is extrapolated
  /// from the final feasible set when the cap binds.
  std::optional<int> max_iterations;
  bool keep_trace{true};
};

class Engine {
 public:
  /// Uses the scenario's strategy unless `adversary` is supplied.
  explicit Engine(Scenario scenario, std::unique_ptr<AdversaryStrategy> adversary = nullptr,
                  EngineOptions options = {});
  ~Engine();

  RunResult run();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Convenience: validate, build the configured strategy and run.
RunResult run_scenario(const Scenario& scenario, EngineOptions options = {});

/// s-d max flow over a dense capacity matrix (nodes 1..n).
double max_flow(const Matrix<double>& capacity, NodeId s, NodeId d);

}  // namespace adhoc
