#pragma once

#include "adhoc/model.hpp"

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <vector>

namespace adhoc {

class DegenerateExchange : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Disconnected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two timing packets from a sender: send stamps in sender counts, receive
/// stamps in receiver counts.
struct TimingExchange {
  Rational s1, s2;
  Rational r1, r2;
};

/// Receiver-relative estimate: tau_receiver ≈ a_hat * tau_sender + b_hat.
struct SkewEstimate {
  Rational a_hat{1};
  Rational b_hat{0};
  NodePair edge{0, 0};  // (receiver, sender)
};

SkewEstimate estimate_skew(const TimingExchange& x, NodePair edge = {0, 0});

/// Worst-case |a_hat - a| for an exchange quantized at `quantum` when the
/// true relative skew is at most `a_bound`.
Rational skew_estimate_error(const Rational& span, const Rational& quantum, const Rational& a_bound);

/// tau_to = skew * tau_from + offset.
struct DeclaredMap {
  Rational skew{1};
  Rational offset{0};

  Rational apply(const Rational& from) const { return skew * from + offset; }
  friend bool operator==(const DeclaredMap&, const DeclaredMap&) = default;
};

/// Declared affine maps keyed by directed edge (from, to).
struct ClockTopology {
  int n{0};
  std::map<NodePair, DeclaredMap> maps;

  bool linked(NodeId u, NodeId v) const { return maps.contains({u, v}) && maps.contains({v, u}); }
  const DeclaredMap& map(NodeId from, NodeId to) const { return maps.at({from, to}); }
  std::vector<NodeId> neighbors(NodeId u) const;
  void remove_link(NodeId u, NodeId v) {
    maps.erase({u, v});
    maps.erase({v, u});
  }
  std::set<NodePair> links() const;  // normalized (min, max)
};

/// Node sequence of a cycle without repeating the first node.
using Cycle = std::vector<NodeId>;

/// Product of declared skews walking `cycle` in order and back to its start.
Rational skew_product(const ClockTopology& topo, const Cycle& cycle);

/// Fundamental cycles (BFS spanning tree rooted at the smallest id, ascending
/// neighbour order) plus two-node cycles formed by both halves of a link,
/// kept when max(p, 1/p) - 1 > eps_a for product p. Each cycle is oriented
/// so that its product is below one (two-node cycles cannot be) and rotated
/// to start at its smallest id; the list is sorted by the cycles' sorted
/// node sets.
std::vector<Cycle> find_inconsistent_cycles(const ClockTopology& topo, const Rational& eps_a);

/// Earliest reference time at which the uniform consistency check may start.
Rational consistency_start_time(int n, const ClockParams& params);

/// Per-cycle waiting bound (a_hat(i_m, i*) (m + 1) K + eps_b) / eps_a.
Rational cycle_start_bound(const Rational& a_hat_to_istar, int m, const ClockParams& params);

/// The node index (0-based along `chain`) with smallest forward skew
/// product, and the composite skew from it to the chain's last node.
struct MinProductNode {
  std::size_t index{0};
  Rational skew_to_end{1};
};
MinProductNode min_product_node(const std::vector<DeclaredMap>& chain);

// -- the cycle check ---------------------------------------------------------

/// One position of a circulating timing packet. The first position only
/// sends, the last only receives.
struct StampRecord {
  NodeId node{0};
  std::optional<Rational> received;
  std::optional<Rational> sent;
};

struct CycleTrace {
  Cycle cycle;  // leader first
  std::vector<StampRecord> hops;

  /// Positions for `laps` trips around `cycle`: laps * m + 1.
  static CycleTrace empty(const Cycle& cycle, int laps);
};

enum class Violation { SkewConsistency, DelayBound, Causality, Timeout };

struct ConsistencyVerdict {
  std::set<NodePair> failed_links;  // normalized (min, max)
  std::vector<std::pair<NodePair, Violation>> violations;
  bool incomplete{false};

  bool clean() const { return failed_links.empty(); }
};

/// Applies the skew-consistency (within eps_b) and delay-bound (<= K)
/// conditions hop by hop. A missing stamp ends the walk and blames the link
/// into the silent position.
ConsistencyVerdict run_cycle_check(const CycleTrace& trace, const ClockTopology& declared,
                                   const ClockParams& params);

// -- delay-sum oracle --------------------------------------------------------

/// Composite map from the first to the last clock of a chain of declared
/// maps (chain[k] maps node k to node k+1).
DeclaredMap compose(const std::vector<DeclaredMap>& chain);

/// Lower bound on the total forwarding delay any stamp assignment satisfying
/// skew consistency and causality must show, for a chain whose endpoints are
/// good and truly related by `truth`, initiated at sender stamp `tau1`.
Rational delay_sum_lower_bound(const std::vector<DeclaredMap>& chain, const DeclaredMap& truth,
                               const Rational& tau1);

/// Same bound from already composed quantities.
Rational delay_sum_lower_bound(const DeclaredMap& truth, const DeclaredMap& declared,
                               const Rational& a_hat_to_istar, const Rational& tau1);

/// Product of declared skews along the deterministic shortest path from each
/// node to the smallest-id node: tau_r ≈ a_hat_ri * tau_i.
std::map<NodeId, Rational> reference_clock(const ClockTopology& topo, const NodeSet& nodes);

}  // namespace adhoc
