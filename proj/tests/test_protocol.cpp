#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "adhoc/protocol.hpp"

#include <functional>

using namespace adhoc;

namespace {

// Tampers with what `from` sends to `to`; returning nullopt drops the message.
using Wire = std::function<std::optional<Message>(NodeId from, NodeId to, Message m)>;

struct Handshake {
  SignatureRegistry reg;
  std::vector<AffineClock> clocks;
  std::vector<Node> nodes;

  explicit Handshake(std::vector<AffineClock> c) : clocks(std::move(c)) {
    const int n = static_cast<int>(clocks.size());
    for (NodeId i = 1; i <= n; ++i) {
      RateProbe probe = [i](NodeId peer) { return std::vector<double>{0.0, static_cast<double>(10 * peer + i)}; };
      nodes.emplace_back(i, n, reg.issue(i), reg, probe);
    }
  }

  // every stage: broadcast at reference time 10 * (stage + 1), heard at once
  void run(const Wire& wire = {}) {
    Rational t = 10;
    for (MsgKind stage : kDiscoveryStages) {
      std::vector<Message> out;
      for (auto& nd : nodes) out.push_back(nd.discovery_outbound(stage));
      for (std::size_t s = 0; s < nodes.size(); ++s) {
        out[s].stamp = clocks[s].exact(t);
        for (std::size_t r = 0; r < nodes.size(); ++r) {
          if (r == s) continue;
          std::optional<Message> m = out[s];
          if (wire) m = wire(static_cast<NodeId>(s + 1), static_cast<NodeId>(r + 1), *m);
          if (m) nodes[r].discovery_receive(*m, clocks[r].exact(t));
        }
      }
      for (auto& nd : nodes) nd.discovery_end(stage);
      t += stage == MsgKind::TIM1 ? 20 : 10;
    }
  }
};

}  // namespace

TEST_CASE("honest handshake keeps the edge with the exact skew") {
  Handshake h({{1, 0}, {Rational(5, 4), 3}});
  h.run();
  CHECK(h.nodes[0].neighbors() == NodeSet{2});
  CHECK(h.nodes[1].neighbors() == NodeSet{1});
  // node 2 maps node 1's counts into its own
  CHECK(h.nodes[1].estimates().at(1).a_hat == Rational(5, 4));
  CHECK(h.nodes[1].estimates().at(1).b_hat == 3);
  CHECK(h.nodes[0].estimates().at(2).a_hat == Rational(4, 5));
  REQUIRE(h.nodes[0].certificates().contains(2));
  auto cert = LinkCertificate::from_item(h.nodes[0].certificates().at(2));
  REQUIRE(cert);
  CHECK(cert->low.owner == 1);
  CHECK(cert->high.claimed_in == std::vector<double>{0.0, 12.0});
  CHECK(h.nodes[0].certificates().at(2).canonical() == h.nodes[1].certificates().at(1).canonical());

  DiscoveryLimits lim;
  lim.a_max = Rational(5, 4);
  lim.min_span = 10;
  CHECK(admissible_certificate(h.nodes[0].certificates().at(2), lim));
  lim.min_span = 1000;
  CHECK_FALSE(admissible_certificate(h.nodes[0].certificates().at(2), lim));
}

TEST_CASE("a node that drops its certificate echo is pruned") {
  Handshake h({{1, 0}, {1, 0}, {1, 0}});
  h.run([](NodeId from, NodeId, Message m) -> std::optional<Message> {
    if (from == 3 && m.kind == MsgKind::LNK2) return std::nullopt;
    return m;
  });
  CHECK(h.nodes[0].neighbors() == NodeSet{2});
  CHECK(h.nodes[1].neighbors() == NodeSet{1});
  CHECK_FALSE(h.nodes[0].certificates().contains(3));
}

TEST_CASE("a tampered certificate fails its signature and is pruned") {
  Handshake h({{1, 0}, {1, 0}, {1, 0}});
  h.run([](NodeId from, NodeId, Message m) -> std::optional<Message> {
    if (from != 3 || m.kind != MsgKind::LNK2) return m;
    for (auto& item : m.certificates) {
      auto half = LinkHalf::parse(item.parts[0].body);
      half->skew *= 2;
      item.parts[0].body = half->body();
    }
    return m;
  });
  CHECK(h.nodes[0].neighbors() == NodeSet{2});
  CHECK(h.nodes[1].neighbors() == NodeSet{1});
}

TEST_CASE("a node that never acknowledges is pruned after ACK") {
  Handshake h({{1, 0}, {1, 0}, {1, 0}});
  h.run([](NodeId from, NodeId, Message m) -> std::optional<Message> {
    if (from == 2 && m.kind == MsgKind::ACK) m.heard.clear();
    return m;
  });
  CHECK(h.nodes[0].neighbors() == NodeSet{3});
  CHECK(h.nodes[2].neighbors() == NodeSet{1});
}

TEST_CASE("phantom neighbors never reach the decided view") {
  Handshake h({{1, 0}, {1, 0}, {1, 0}});
  h.run();
  // node 3 invents a certificate for link 3-4 in a 4-node id space by
  // signing both halves itself
  LinkHalf a{3, 4, 1, 0, 20, {1.0}}, b{4, 3, 1, 0, 20, {1.0}};
  Item fake;
  fake.key = LinkCertificate::key(3, 4);
  fake.parts = {h.nodes[2].sign(a.body()), h.nodes[2].sign(b.body())};
  const bool accepted = fake.valid(h.reg) && LinkCertificate::from_item(fake).has_value();
  CHECK_FALSE(accepted);

  std::map<std::string, Item> decided;
  for (const auto& [peer, item] : h.nodes[0].certificates()) decided[item.key] = item;
  for (const auto& [peer, item] : h.nodes[2].certificates()) decided[item.key] = item;
  decided[fake.key] = fake;
  DiscoveryLimits lim;
  lim.a_max = 2;
  std::erase_if(decided, [&](const auto& kv) { return !admissible_certificate(kv.second, lim); });
  NetworkView v = view_from_certificates(decided, 3);
  CHECK(v.certificates.size() == 3);
  CHECK_FALSE(v.topology.linked(3, 4));
}

TEST_CASE("verification slot budget") {
  CHECK(verification_slot_count(3) == 54);
  CHECK(verification_slot_count(2) == 8);
}

TEST_CASE("failure records count only from scheduled receivers") {
  SignatureRegistry reg;
  auto k1 = reg.issue(1), k2 = reg.issue(2), k3 = reg.issue(3);
  Schedule sched;
  Slot s;
  s.entry = 0;
  s.ctv = 4;
  s.tx = {1};
  s.rx = {2};
  sched.slots = {s, Slot{}};

  auto item = [&](const SigningKey& key, const FailureRecord& r) {
    return Item{r.key(), {sign_part(reg, key, r.body())}};
  };
  std::map<std::string, Item> decided;
  SUBCASE("empty list prunes nothing") { CHECK(failed_entries(decided, sched, 1, reg).empty()); }
  SUBCASE("bad reporter outside RX is ignored") {
    FailureRecord r{1, 0, 4, 3};
    decided[r.key()] = item(k3, r);
    CHECK(failed_entries(decided, sched, 1, reg).empty());
  }
  SUBCASE("scheduled receiver prunes the slot's CTV") {
    FailureRecord r{1, 0, 4, 2};
    decided[r.key()] = item(k2, r);
    CHECK(failed_entries(decided, sched, 1, reg) == std::vector<std::size_t>{4});
    CHECK(failed_entries(decided, sched, 2, reg).empty());
  }
  SUBCASE("a record signed by someone else is ignored") {
    FailureRecord r{1, 0, 4, 2};
    decided[r.key()] = item(k1, r);
    CHECK(failed_entries(decided, sched, 1, reg).empty());
  }
  SUBCASE("wrong CTV for the slot is ignored") {
    FailureRecord r{1, 0, 5, 2};
    decided[r.key()] = item(k2, r);
    CHECK(failed_entries(decided, sched, 1, reg).empty());
  }
}

TEST_CASE("record bodies round-trip") {
  FailureRecord f{3, 7, 2, 5};
  auto g = FailureRecord::parse(f.body());
  REQUIRE(g);
  CHECK(g->key() == f.key());
  StampReport s{1, 4, 2, Rational(7, 3), std::nullopt};
  auto t = StampReport::parse(s.body());
  REQUIRE(t);
  CHECK(t->received == Rational(7, 3));
  CHECK_FALSE(t->sent.has_value());
  CHECK_FALSE(FailureRecord::parse("not json").has_value());
}
