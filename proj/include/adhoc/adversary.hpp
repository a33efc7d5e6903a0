#pragma once

#include "adhoc/protocol.hpp"

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace adhoc {

// -- delay-minimizing stamps for a bad segment -------------------------------

/// Stamps played by the bad interior of a chain whose two ends are good.
/// Position 0 is the good sender, position m the good receiver.
struct SegmentStamps {
  std::vector<Rational> received;  // per position; [0] unused
  std::vector<Rational> sent;      // per position; [m] unused
  std::vector<Rational> hold;      // sent - received at interior positions
  Rational delay_sum{0};
  Rational end_received{0};
};

/// Stamps meeting every declared map exactly (received[k+1] =
/// chain[k](sent[k])) with nonnegative holds, arriving no earlier than
/// `truth(t1)` on the receiver's clock. Holds go where the declared skew from
/// the holder to the end is largest, so the delay sum is the least any such
/// assignment can show. With `cap`, holds are first spread in that order
/// keeping each within the cap, and only the remainder piles onto the best
/// position.
SegmentStamps delay_minimizing_clocks(const std::vector<DeclaredMap>& chain, const DeclaredMap& truth,
                                      const Rational& t1, std::optional<Rational> cap = std::nullopt);

// -- strategy hooks ----------------------------------------------------------

/// Everything the coordinated adversary knows at start-up.
struct AdversaryContext {
  int n{0};
  NodeSet bad;
  const RateModel* model{nullptr};
  std::vector<AffineClock> clocks;  // index i-1
  ClockParams params;
  Digraph audible;
  std::uint64_t seed{0};
};

struct MessageContext {
  NodeId sender{0};
  NodeId receiver{0};
  MsgKind kind{MsgKind::PRB};
  Time t{0};
};

enum class SlotAction { Conform, Jam, Silent, Rush };
std::string to_string(SlotAction a);

/// One strategy steers every bad node. Default hooks behave like a good node.
class AdversaryStrategy {
 public:
  virtual ~AdversaryStrategy() = default;
  virtual std::string name() const = 0;
  virtual void bind(const AdversaryContext& ctx) { ctx_ = ctx; }

  /// Discovery packet from a bad sender to one receiver; nullopt drops it.
  virtual std::optional<Message> on_message(const MessageContext&, Message honest) { return honest; }
  /// Clock value a bad node shows `peer`, both in its stamps and in what it
  /// reports having read on reception.
  virtual Rational presented_reading(NodeId bad, NodeId peer, const Time& t);
  /// Rates a bad node claims to receive from `peer`, per catalogue entry.
  virtual std::vector<double> claim_rates(NodeId, NodeId, std::vector<double> measured) { return measured; }
  /// Agreement relays from a bad node.
  virtual std::vector<EigVertex> on_eig(NodeId, NodeId, Phase, std::size_t, std::vector<EigVertex> honest) {
    return honest;
  }
  /// Bad interior of a circulating timing packet: play delay-minimizing
  /// stamps instead of forwarding honestly.
  virtual bool fabricates_stamps() const { return false; }
  virtual SlotAction slot_action(NodeId, int, std::size_t, const Slot&) { return SlotAction::Conform; }
  /// Failure reports the bad nodes submit for an iteration.
  virtual std::vector<FailureRecord> failure_reports(int, const Schedule&, std::vector<FailureRecord> honest) {
    return honest;
  }

 protected:
  AdversaryContext ctx_;
};

class AlwaysConform : public AdversaryStrategy {
 public:
  std::string name() const override { return "AlwaysConform"; }
};

/// Jams every data slot scheduled on a CTV in `disable` (all jammable
/// entries when empty) and otherwise conforms.
class AlwaysJam : public AdversaryStrategy {
 public:
  explicit AlwaysJam(std::vector<std::size_t> disable = {}) : disable_(std::move(disable)) {}
  std::string name() const override { return "AlwaysJam"; }
  void bind(const AdversaryContext& ctx) override;
  SlotAction slot_action(NodeId, int, std::size_t, const Slot& s) override;
  const std::vector<std::size_t>& disable() const { return disable_; }

 private:
  std::vector<std::size_t> disable_;
};

/// Shows one neighbor a clock running (1 + delta) times faster and plays
/// delay-minimizing stamps in the consistency check. The lie is per link: a
/// clock misrepresented the same way to everyone cancels along every path.
class FalseSkewEmulator : public AdversaryStrategy {
 public:
  explicit FalseSkewEmulator(Rational delta, std::map<NodeId, NodeId> target = {})
      : delta_(std::move(delta)), target_(std::move(target)) {}
  std::string name() const override { return "FalseSkewEmulator"; }
  void bind(const AdversaryContext& ctx) override;
  Rational presented_reading(NodeId bad, NodeId peer, const Time& t) override;
  bool fabricates_stamps() const override { return true; }
  const std::map<NodeId, NodeId>& targets() const { return target_; }

 private:
  Rational delta_;
  std::map<NodeId, NodeId> target_;
};

/// Skips a seeded fraction of its scheduled data transmissions.
class GrayHole : public AdversaryStrategy {
 public:
  explicit GrayHole(double fraction) : fraction_(fraction) {}
  std::string name() const override { return "GrayHole"; }
  void bind(const AdversaryContext& ctx) override;
  SlotAction slot_action(NodeId, int, std::size_t, const Slot&) override;

 private:
  double fraction_;
  std::mt19937_64 rng_;
};

/// Starts its transmissions ahead of the guard time, into the previous slot.
class SlotRusher : public AdversaryStrategy {
 public:
  std::string name() const override { return "SlotRusher"; }
  SlotAction slot_action(NodeId, int, std::size_t, const Slot&) override { return SlotAction::Rush; }
};

/// Withholds agreement relays that would carry information originating in
/// one good group to the other.
class PartitionSeeker : public AdversaryStrategy {
 public:
  PartitionSeeker(NodeSet a, NodeSet b) : a_(std::move(a)), b_(std::move(b)) {}
  std::string name() const override { return "PartitionSeeker"; }
  void bind(const AdversaryContext& ctx) override;
  std::vector<EigVertex> on_eig(NodeId from, NodeId to, Phase, std::size_t, std::vector<EigVertex> honest) override;

 private:
  NodeSet a_, b_;
};

/// Built-in names: AlwaysConform, AlwaysJam, FalseSkewEmulator, GrayHole,
/// SlotRusher, PartitionSeeker.
std::vector<std::string> builtin_strategies();

/// Settings a scenario may give a built-in strategy.
struct StrategySettings {
  std::vector<std::size_t> disable;
  Rational delta{Rational(1, 10)};
  std::map<NodeId, NodeId> target;
  double fraction{0.5};
  NodeSet group_a, group_b;
};

std::unique_ptr<AdversaryStrategy> make_strategy(const std::string& name, const StrategySettings& s);

}  // namespace adhoc
