#pragma once

#include "adhoc/clocks.hpp"
#include "adhoc/consensus.hpp"
#include "adhoc/scheduler.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adhoc {

enum class Phase { NeighborDiscovery, NetworkDiscovery, ConsistencyCheck, Scheduling, DataTransfer, Verification };
std::string to_string(Phase p);

enum class MsgKind { PRB, ACK, TIM1, TIM2, LNK1, LNK2, EIG, CCHK, DATA, VRFY };
std::string to_string(MsgKind k);

/// The six neighbor-discovery stages in order.
inline constexpr MsgKind kDiscoveryStages[] = {MsgKind::PRB, MsgKind::ACK, MsgKind::TIM1,
                                              MsgKind::TIM2, MsgKind::LNK1, MsgKind::LNK2};

struct Message {
  static constexpr int kWireVersion = 1;

  MsgKind kind{MsgKind::PRB};
  NodeId sender{0};
  NodeSet heard;                      // ACK
  Rational stamp{0};                  // TIM1, TIM2: sender counts at packet start
  std::vector<SignedPart> halves;     // LNK1: one per neighbor
  std::vector<Item> certificates;     // LNK2
  std::vector<EigVertex> vertices;    // EIG, VRFY

  std::string digest() const;
};

// -- signed records carried through agreement ------------------------------

/// A receiver's claim that an expected transmission did not arrive.
struct FailureRecord {
  int iteration{0};
  std::size_t slot{0};
  std::size_t ctv{0};
  NodeId reporter{0};

  std::string key() const;
  std::string body() const;
  static std::optional<FailureRecord> parse(const std::string& body);
};

/// One node's stamps at one position of a circulating timing packet.
struct StampReport {
  std::size_t cycle{0};
  std::size_t position{0};
  NodeId node{0};
  std::optional<Rational> received;
  std::optional<Rational> sent;

  std::string key() const;
  std::string body() const;
  static std::optional<StampReport> parse(const std::string& body);
};

// -- the shared view derived from decided certificates -----------------------

struct DiscoveryLimits {
  Rational a_max{1};
  /// Certificates whose owner saw a timing span below this are refused: the
  /// skew estimate would be too coarse for the consistency threshold.
  Rational min_span{0};
  /// Relative allowance on the skew bound for quantization error.
  Rational slack{Rational(1, 8)};
};

/// Link certificate admission: well-formed, both halves signed by their owners,
/// skews within the model's relative bound, spans above the floor.
bool admissible_certificate(const Item& item, const DiscoveryLimits& limits);

struct NetworkView {
  int n{0};
  std::map<NodePair, LinkCertificate> certificates;  // normalized link -> certificate
  ClockTopology topology;

  /// Claimed rate matrix of catalogue entry `e` over the links still present.
  RateMatrix claimed_rates(std::size_t e) const;
  std::size_t catalogue_size() const;
  Rational min_span() const;
  void remove_link(NodePair link);
};

NetworkView view_from_certificates(const std::map<std::string, Item>& decided, int n);

/// Initial feasible set: every catalogue entry with its claimed rates.
FeasibleSet initial_feasible_set(const NetworkView& view);

/// Number of distinct claimed rate vectors.
int distinct_rate_vectors(const FeasibleSet& feasible);

/// The steady-state operating point every node derives from C_k.
struct OperatingPoint {
  NodeSet component;
  UtilityOptimum optimum;
  Schedule schedule;
  std::string fingerprint;  // equal across nodes iff schedules are identical
};

OperatingPoint plan_iteration(const FeasibleSet& feasible, const RateModel& catalogue, const UtilitySpec& utility,
                              NodeId self, int n, const Rational& b_slot, const Rational& dead_time);

/// Failed CTVs named by decided failure records. A record counts only when
/// its reporter was scheduled to receive in that slot and the slot's CTV
/// matches.
std::vector<std::size_t> failed_entries(const std::map<std::string, Item>& decided, const Schedule& schedule,
                                        int iteration, const SignatureRegistry& reg);

// -- per-node state machine -------------------------------------------------

/// Local measurement of incoming rates from `peer`, one value per catalogue
/// entry. Good nodes receive the engine's measurement; bad nodes whatever the
/// adversary claims.
using RateProbe = std::function<std::vector<double>(NodeId peer)>;

class Node {
 public:
  Node(NodeId id, int n, SigningKey key, SignatureRegistry& reg, RateProbe probe);

  NodeId id() const { return id_; }
  Phase phase() const { return phase_; }
  const NodeSet& neighbors() const { return neighbors_; }
  const std::map<NodeId, Item>& certificates() const { return certificates_; }
  const std::map<NodeId, SkewEstimate>& estimates() const { return estimates_; }
  const SigningKey& key() const { return key_; }

  // neighbor discovery: one broadcast per stage, receptions stamped with the
  // local reading at packet start, then a prune at stage end
  Message discovery_outbound(MsgKind stage);
  void discovery_receive(const Message& m, const Rational& local_reading);
  void discovery_end(MsgKind stage);

  // agreement rounds over the current neighbor set
  void eig_begin(Phase phase, std::vector<Item> root);
  std::vector<EigVertex> eig_outbound(std::size_t round);
  void eig_receive(std::size_t round, const std::vector<EigInbound>& inbound);
  std::map<std::string, Item> eig_decide(const ItemCheck& admissible) const;

  /// Signs an arbitrary record body as this node.
  SignedPart sign(const std::string& body);

  void set_phase(Phase p) { phase_ = p; }
  /// Restricts the neighbor set to links surviving in the agreed view.
  void restrict_neighbors(const NetworkView& view);

 private:
  NodeId id_;
  int n_;
  SigningKey key_;
  SignatureRegistry* reg_;
  RateProbe probe_;
  Phase phase_{Phase::NeighborDiscovery};

  NodeSet heard_;
  NodeSet neighbors_;
  NodeSet acked_;
  std::map<NodeId, std::pair<Rational, Rational>> tim1_, tim2_;  // peer -> (sent, received)
  std::map<NodeId, SkewEstimate> estimates_;
  std::map<NodeId, SignedPart> own_halves_;
  std::map<NodeId, SignedPart> peer_halves_;
  std::map<NodeId, Item> certificates_;
  NodeSet confirmed_;

  EigTree tree_;
};

}  // namespace adhoc
