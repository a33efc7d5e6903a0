#include "adhoc/adversary.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace adhoc {

SegmentStamps delay_minimizing_clocks(const std::vector<DeclaredMap>& chain, const DeclaredMap& truth,
                                      const Rational& t1, std::optional<Rational> cap) {
  const std::size_t m = chain.size();
  if (m == 0) throw std::invalid_argument("delay_minimizing_clocks: empty chain");
  SegmentStamps out;
  out.received.assign(m + 1, Rational(0));
  out.sent.assign(m + 1, Rational(0));
  out.hold.assign(m + 1, Rational(0));

  // suffix[k]: declared skew from position k to the end
  std::vector<Rational> suffix(m + 1, Rational(1));
  for (std::size_t k = m; k-- > 0;) suffix[k] = chain[k].skew * suffix[k + 1];

  const Rational shortfall = truth.apply(t1) - compose(chain).apply(t1);
  if (shortfall > 0 && m >= 2) {
    std::vector<std::size_t> order(m - 1);
    std::iota(order.begin(), order.end(), std::size_t{1});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return suffix[x] > suffix[y]; });
    Rational left = shortfall;
    if (cap) {
      for (std::size_t k : order) {
        if (left <= 0) break;
        const Rational h = std::min(*cap, Rational(left / suffix[k]));
        out.hold[k] += h;
        left -= suffix[k] * h;
      }
    }
    if (left > 0) out.hold[order.front()] += left / suffix[order.front()];
  }

  out.sent[0] = t1;
  for (std::size_t k = 1; k <= m; ++k) {
    out.received[k] = chain[k - 1].apply(out.sent[k - 1]);
    if (k < m) {
      out.sent[k] = out.received[k] + out.hold[k];
      out.delay_sum += out.hold[k];
    }
  }
  // a packet cannot reach the good end before it physically could
  out.end_received = std::max(out.received[m], truth.apply(t1));
  return out;
}

std::string to_string(SlotAction a) {
  switch (a) {
    case SlotAction::Conform: return "conform";
    case SlotAction::Jam: return "jam";
    case SlotAction::Silent: return "silent";
    case SlotAction::Rush: return "rush";
  }
  return "?";
}

Rational AdversaryStrategy::presented_reading(NodeId bad, NodeId, const Time& t) {
  return ctx_.clocks.at(bad - 1).read(t, ctx_.params.quantum);
}

void AlwaysJam::bind(const AdversaryContext& ctx) {
  AdversaryStrategy::bind(ctx);
  if (disable_.empty() && ctx.model) disable_ = jammable_entries(*ctx.model, ctx.bad);
  std::sort(disable_.begin(), disable_.end());
}

SlotAction AlwaysJam::slot_action(NodeId, int, std::size_t, const Slot& s) {
  if (s.ctv && std::binary_search(disable_.begin(), disable_.end(), *s.ctv)) return SlotAction::Jam;
  return SlotAction::Conform;
}

void FalseSkewEmulator::bind(const AdversaryContext& ctx) {
  AdversaryStrategy::bind(ctx);
  for (NodeId b : ctx.bad) {
    if (target_.contains(b)) continue;
    for (NodeId g = 1; g <= ctx.n; ++g)
      if (!ctx.bad.contains(g) && ctx.audible.size() >= ctx.n && ctx.audible.bidirectional(b, g)) {
        target_[b] = g;
        break;
      }
  }
}

Rational FalseSkewEmulator::presented_reading(NodeId bad, NodeId peer, const Time& t) {
  const Rational honest = AdversaryStrategy::presented_reading(bad, peer, t);
  auto it = target_.find(bad);
  if (it != target_.end() && it->second == peer) return honest * (1 + delta_);
  return honest;
}

void GrayHole::bind(const AdversaryContext& ctx) {
  AdversaryStrategy::bind(ctx);
  rng_.seed(ctx.seed ^ 0x6a09e667f3bcc909ull);
}

SlotAction GrayHole::slot_action(NodeId bad, int, std::size_t, const Slot& s) {
  if (!s.tx.contains(bad)) return SlotAction::Conform;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng_) < fraction_ ? SlotAction::Silent : SlotAction::Conform;
}

void PartitionSeeker::bind(const AdversaryContext& ctx) {
  AdversaryStrategy::bind(ctx);
  if (!a_.empty() || !b_.empty()) return;
  // default split: lower and upper half of the good nodes
  std::vector<NodeId> good;
  for (NodeId i = 1; i <= ctx.n; ++i)
    if (!ctx.bad.contains(i)) good.push_back(i);
  for (std::size_t k = 0; k < good.size(); ++k) (2 * k < good.size() ? a_ : b_).insert(good[k]);
}

std::vector<EigVertex> PartitionSeeker::on_eig(NodeId, NodeId to, Phase, std::size_t,
                                               std::vector<EigVertex> honest) {
  const NodeSet* blocked = a_.contains(to) ? &b_ : b_.contains(to) ? &a_ : nullptr;
  if (!blocked) return honest;
  std::erase_if(honest, [&](const EigVertex& v) { return !v.label.empty() && blocked->contains(v.label.front()); });
  return honest;
}

std::vector<std::string> builtin_strategies() {
  return {"AlwaysConform", "AlwaysJam", "FalseSkewEmulator", "GrayHole", "SlotRusher", "PartitionSeeker"};
}

std::unique_ptr<AdversaryStrategy> make_strategy(const std::string& name, const StrategySettings& s) {
  if (name == "AlwaysConform") return std::make_unique<AlwaysConform>();
  if (name == "AlwaysJam") return std::make_unique<AlwaysJam>(s.disable);
  if (name == "FalseSkewEmulator") return std::make_unique<FalseSkewEmulator>(s.delta, s.target);
  if (name == "GrayHole") return std::make_unique<GrayHole>(s.fraction);
  if (name == "SlotRusher") return std::make_unique<SlotRusher>();
  if (name == "PartitionSeeker") return std::make_unique<PartitionSeeker>(s.group_a, s.group_b);
  throw std::invalid_argument("unknown adversary strategy '" + name + "'");
}

}  // namespace adhoc
