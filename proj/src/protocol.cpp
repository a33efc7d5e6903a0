#include "adhoc/protocol.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace adhoc {

using nlohmann::json;

std::string to_string(Phase p) {
  switch (p) {
    case Phase::NeighborDiscovery: return "neighbor-discovery";
    case Phase::NetworkDiscovery: return "network-discovery";
    case Phase::ConsistencyCheck: return "consistency-check";
    case Phase::Scheduling: return "scheduling";
    case Phase::DataTransfer: return "data-transfer";
    case Phase::Verification: return "verification";
  }
  return "?";
}

std::string to_string(MsgKind k) {
  switch (k) {
    case MsgKind::PRB: return "PRB";
    case MsgKind::ACK: return "ACK";
    case MsgKind::TIM1: return "TIM1";
    case MsgKind::TIM2: return "TIM2";
    case MsgKind::LNK1: return "LNK1";
    case MsgKind::LNK2: return "LNK2";
    case MsgKind::EIG: return "EIG";
    case MsgKind::CCHK: return "CCHK";
    case MsgKind::DATA: return "DATA";
    case MsgKind::VRFY: return "VRFY";
  }
  return "?";
}

std::string Message::digest() const {
  std::string bytes = std::to_string(kWireVersion) + "|" + to_string(kind) + "|" + std::to_string(sender) + "|";
  for (NodeId h : heard) bytes += std::to_string(h) + ",";
  bytes += "|" + to_string(stamp) + "|";
  for (const auto& p : halves) bytes += std::to_string(p.signer) + ":" + p.body + ";";
  for (const auto& c : certificates) bytes += c.canonical() + ";";
  for (const auto& v : vertices) {
    for (NodeId l : v.label) bytes += std::to_string(l) + ".";
    for (const auto& it : v.items) bytes += it.canonical() + ";";
  }
  return hex_digest(bytes);
}

// -- records ----------------------------------------------------------------

std::string FailureRecord::key() const {
  return "fail:" + std::to_string(iteration) + ":" + std::to_string(slot) + ":" + std::to_string(reporter);
}

std::string FailureRecord::body() const {
  json j;
  j["kind"] = "failure";
  j["iteration"] = iteration;
  j["slot"] = slot;
  j["ctv"] = ctv;
  j["reporter"] = reporter;
  return j.dump();
}

std::optional<FailureRecord> FailureRecord::parse(const std::string& body) {
  try {
    json j = json::parse(body);
    if (j.at("kind") != "failure") return std::nullopt;
    FailureRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.slot = j.at("slot").get<std::size_t>();
    r.ctv = j.at("ctv").get<std::size_t>();
    r.reporter = j.at("reporter").get<NodeId>();
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string StampReport::key() const {
  return "stamp:" + std::to_string(cycle) + ":" + std::to_string(position);
}

std::string StampReport::body() const {
  json j;
  j["kind"] = "stamp";
  j["cycle"] = cycle;
  j["position"] = position;
  j["node"] = node;
  j["received"] = received ? json(to_string(*received)) : json(nullptr);
  j["sent"] = sent ? json(to_string(*sent)) : json(nullptr);
  return j.dump();
}

std::optional<StampReport> StampReport::parse(const std::string& body) {
  try {
    json j = json::parse(body);
    if (j.at("kind") != "stamp") return std::nullopt;
    StampReport r;
    r.cycle = j.at("cycle").get<std::size_t>();
    r.position = j.at("position").get<std::size_t>();
    r.node = j.at("node").get<NodeId>();
    if (!j.at("received").is_null()) r.received = parse_rational(j.at("received").get<std::string>());
    if (!j.at("sent").is_null()) r.sent = parse_rational(j.at("sent").get<std::string>());
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// -- view -------------------------------------------------------------------

bool admissible_certificate(const Item& item, const DiscoveryLimits& limits) {
  auto cert = LinkCertificate::from_item(item);
  if (!cert) return false;
  const Rational hi = limits.a_max * (1 + limits.slack);
  const Rational lo = 1 / hi;
  for (const LinkHalf* h : {&cert->low, &cert->high}) {
    if (h->skew < lo || h->skew > hi) return false;
    if (h->span < limits.min_span || h->span <= 0) return false;
  }
  return true;
}

RateMatrix NetworkView::claimed_rates(std::size_t e) const {
  RateMatrix r = zero_rates(n);
  for (const auto& [link, cert] : certificates) {
    // each half reports what its owner hears from the peer
    for (const LinkHalf* h : {&cert.low, &cert.high})
      if (e < h->claimed_in.size()) rate(r, h->peer, h->owner) = h->claimed_in[e];
  }
  return r;
}

std::size_t NetworkView::catalogue_size() const {
  std::size_t k = 0;
  for (const auto& [link, cert] : certificates)
    k = std::max({k, cert.low.claimed_in.size(), cert.high.claimed_in.size()});
  return k;
}

Rational NetworkView::min_span() const {
  std::optional<Rational> lo;
  for (const auto& [link, cert] : certificates)
    for (const LinkHalf* h : {&cert.low, &cert.high})
      if (!lo || h->span < *lo) lo = h->span;
  return lo.value_or(Rational(0));
}

void NetworkView::remove_link(NodePair link) {
  certificates.erase({std::min(link.first, link.second), std::max(link.first, link.second)});
  topology.remove_link(link.first, link.second);
}

NetworkView view_from_certificates(const std::map<std::string, Item>& decided, int n) {
  NetworkView v;
  v.n = n;
  v.topology.n = n;
  for (const auto& [key, item] : decided) {
    if (key.rfind("link:", 0) != 0) continue;
    auto cert = LinkCertificate::from_item(item);
    if (!cert) continue;
    const NodePair link{cert->low.owner, cert->high.owner};
    v.certificates.emplace(link, *cert);
    for (const LinkHalf* h : {&cert->low, &cert->high}) v.topology.maps[{h->peer, h->owner}] = {h->skew, h->offset};
  }
  return v;
}

FeasibleSet initial_feasible_set(const NetworkView& view) {
  FeasibleSet fs;
  for (std::size_t e = 0; e < view.catalogue_size(); ++e) fs.entries.push_back({e, view.claimed_rates(e)});
  return fs;
}

int distinct_rate_vectors(const FeasibleSet& feasible) {
  std::set<std::vector<double>> seen;
  for (const auto& e : feasible.entries) seen.insert(std::vector<double>(e.claimed.data(), e.claimed.data() + e.claimed.size()));
  return static_cast<int>(seen.size());
}

OperatingPoint plan_iteration(const FeasibleSet& feasible, const RateModel& catalogue, const UtilitySpec& utility,
                              NodeId self, int n, const Rational& b_slot, const Rational& dead_time) {
  OperatingPoint op;
  std::vector<RateMatrix> claimed;
  for (const auto& e : feasible.entries) claimed.push_back(e.claimed);
  op.component = good_component(rate_graph(claimed, n), {self});
  op.optimum = max_utility_lp(feasible, utility, op.component, n);
  op.schedule = discretize(op.optimum, feasible, catalogue, n, b_slot, dead_time);

  std::string bytes;
  for (NodeId c : op.component) bytes += std::to_string(c) + ",";
  char buf[64];
  for (const auto& s : op.schedule.slots) {
    bytes += "|" + (s.ctv ? std::to_string(*s.ctv) : std::string("idle"));
    for (const auto& sh : s.manifest) {
      std::snprintf(buf, sizeof buf, "%d>%d:%d>%d@%.17g;", sh.from, sh.to, sh.commodity.first, sh.commodity.second,
                    sh.fraction);
      bytes += buf;
    }
  }
  op.fingerprint = hex_digest(bytes);
  return op;
}

std::vector<std::size_t> failed_entries(const std::map<std::string, Item>& decided, const Schedule& schedule,
                                        int iteration, const SignatureRegistry& reg) {
  std::set<std::size_t> out;
  for (const auto& [key, item] : decided) {
    if (key.rfind("fail:", 0) != 0 || item.parts.size() != 1 || !item.valid(reg)) continue;
    auto rec = FailureRecord::parse(item.parts[0].body);
    if (!rec || rec->reporter != item.parts[0].signer || rec->key() != key) continue;
    if (rec->iteration != iteration || rec->slot >= schedule.slots.size()) continue;
    const Slot& s = schedule.slots[rec->slot];
    if (!s.rx.contains(rec->reporter) || s.ctv != rec->ctv) continue;
    out.insert(rec->ctv);
  }
  return {out.begin(), out.end()};
}

// -- node -------------------------------------------------------------------

Node::Node(NodeId id, int n, SigningKey key, SignatureRegistry& reg, RateProbe probe)
    : id_(id), n_(n), key_(key), reg_(&reg), probe_(std::move(probe)) {}

SignedPart Node::sign(const std::string& body) { return sign_part(*reg_, key_, body); }

Message Node::discovery_outbound(MsgKind stage) {
  Message m;
  m.kind = stage;
  m.sender = id_;
  switch (stage) {
    case MsgKind::ACK: m.heard = heard_; break;
    case MsgKind::LNK1:
      for (NodeId j : neighbors_) {
        const auto& est = estimates_.at(j);
        LinkHalf h;
        h.owner = id_;
        h.peer = j;
        h.skew = est.a_hat;
        h.offset = est.b_hat;
        h.span = tim2_.at(j).second - tim1_.at(j).second;
        h.claimed_in = probe_ ? probe_(j) : std::vector<double>{};
        own_halves_[j] = sign(h.body());
        m.halves.push_back(own_halves_[j]);
      }
      break;
    case MsgKind::LNK2:
      for (NodeId j : neighbors_) {
        const SignedPart& mine = own_halves_.at(j);
        const SignedPart& theirs = peer_halves_.at(j);
        Item item;
        item.key = LinkCertificate::key(id_, j);
        item.parts = id_ < j ? std::vector<SignedPart>{mine, theirs} : std::vector<SignedPart>{theirs, mine};
        certificates_[j] = item;
        m.certificates.push_back(item);
      }
      break;
    default: break;
  }
  return m;
}

void Node::discovery_receive(const Message& m, const Rational& local_reading) {
  const NodeId j = m.sender;
  if (j == id_ || j < 1 || j > n_) return;
  if (m.kind != MsgKind::PRB && !neighbors_.contains(j)) return;
  switch (m.kind) {
    case MsgKind::PRB: heard_.insert(j); break;
    case MsgKind::ACK:
      if (m.heard.contains(id_)) acked_.insert(j);
      break;
    case MsgKind::TIM1: tim1_[j] = {m.stamp, local_reading}; break;
    case MsgKind::TIM2: tim2_[j] = {m.stamp, local_reading}; break;
    case MsgKind::LNK1:
      for (const auto& part : m.halves) {
        auto h = LinkHalf::parse(part.body);
        if (!h || part.signer != j || h->owner != j || h->peer != id_) continue;
        if (part.sig.signer != j || !reg_->verify(part.sig, part.body)) continue;
        peer_halves_[j] = part;
        break;
      }
      break;
    case MsgKind::LNK2:
      for (const auto& item : m.certificates) {
        if (item.key != LinkCertificate::key(id_, j) || !item.valid(*reg_)) continue;
        if (!LinkCertificate::from_item(item) || !own_halves_.contains(j)) continue;
        const bool mine_intact = std::find(item.parts.begin(), item.parts.end(), own_halves_.at(j)) != item.parts.end();
        if (!mine_intact) continue;
        certificates_[j] = item;
        confirmed_.insert(j);
        break;
      }
      break;
    default: break;
  }
}

void Node::discovery_end(MsgKind stage) {
  auto keep = [&](auto pred) { std::erase_if(neighbors_, [&](NodeId j) { return !pred(j); }); };
  switch (stage) {
    case MsgKind::PRB:
      neighbors_ = heard_;
      neighbors_.erase(id_);
      break;
    case MsgKind::ACK: keep([&](NodeId j) { return acked_.contains(j); }); break;
    case MsgKind::TIM1: keep([&](NodeId j) { return tim1_.contains(j); }); break;
    case MsgKind::TIM2:
      keep([&](NodeId j) {
        if (!tim1_.contains(j) || !tim2_.contains(j)) return false;
        const auto& [s1, r1] = tim1_.at(j);
        const auto& [s2, r2] = tim2_.at(j);
        try {
          estimates_[j] = estimate_skew({s1, s2, r1, r2}, {id_, j});
        } catch (const DegenerateExchange&) {
          return false;
        }
        return r2 > r1;
      });
      break;
    case MsgKind::LNK1: keep([&](NodeId j) { return peer_halves_.contains(j); }); break;
    case MsgKind::LNK2:
      keep([&](NodeId j) { return confirmed_.contains(j); });
      std::erase_if(certificates_, [&](const auto& kv) { return !neighbors_.contains(kv.first); });
      break;
    default: break;
  }
}

void Node::eig_begin(Phase phase, std::vector<Item> root) {
  phase_ = phase;
  tree_ = EigTree{};
  tree_.owner = id_;
  tree_.n = n_;
  tree_.root = std::move(root);
}

std::vector<EigVertex> Node::eig_outbound(std::size_t round) { return adhoc::eig_outbound(tree_, round, *reg_, key_); }

void Node::eig_receive(std::size_t round, const std::vector<EigInbound>& inbound) {
  std::vector<EigInbound> heard;
  for (const auto& in : inbound)
    if (neighbors_.contains(in.from)) heard.push_back(in);
  eig_round(tree_, round, heard, *reg_);
}

std::map<std::string, Item> Node::eig_decide(const ItemCheck& admissible) const {
  return adhoc::eig_decide(tree_, *reg_, admissible);
}

void Node::restrict_neighbors(const NetworkView& view) {
  std::erase_if(neighbors_, [&](NodeId j) { return !view.topology.linked(id_, j); });
}

}  // namespace adhoc
