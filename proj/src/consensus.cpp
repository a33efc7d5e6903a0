#include "adhoc/consensus.hpp"

#include "json.hpp"

#include <algorithm>
#include <set>

namespace adhoc {

using nlohmann::json;

bool Item::valid(const SignatureRegistry& reg) const {
  if (parts.empty()) return false;
  std::set<NodeId> seen;
  for (const auto& p : parts) {
    if (p.sig.signer != p.signer || !seen.insert(p.signer).second) return false;
    if (!reg.verify(p.sig, p.body)) return false;
  }
  return true;
}

std::string Item::canonical() const {
  std::string out = key;
  for (const auto& p : parts) {
    out += '|';
    out += std::to_string(p.signer);
    out += ':';
    out += p.body;
  }
  return out;
}

SignedPart sign_part(SignatureRegistry& reg, const SigningKey& key, std::string body) {
  Signature sig = reg.sign(key, body);
  return {key.owner(), std::move(body), sig};
}

std::vector<const EigVertex*> EigTree::level(std::size_t k) const {
  std::vector<const EigVertex*> out;
  for (const auto& [label, v] : vertices)
    if (label.size() == k) out.push_back(&v);
  return out;
}

namespace {

std::string items_payload(const std::vector<Item>& items) {
  std::string out;
  for (const auto& it : items) {
    out += '#';
    out += it.canonical();
  }
  return out;
}

}  // namespace

std::string chain_payload(const Label& prefix, const std::vector<Item>& items) {
  std::string out = "eig";
  for (NodeId id : prefix) out += "/" + std::to_string(id);
  return out + items_payload(items);
}

std::vector<EigVertex> eig_outbound(const EigTree& tree, std::size_t k, SignatureRegistry& reg,
                                    const SigningKey& key) {
  std::vector<EigVertex> out;
  auto extend = [&](const Label& label, const std::vector<Item>& items, const std::vector<Signature>& chain) {
    EigVertex v;
    v.label = label;
    v.label.push_back(tree.owner);
    v.items = items;
    v.chain = chain;
    v.chain.push_back(reg.sign(key, chain_payload(v.label, items)));
    out.push_back(std::move(v));
  };
  if (k == 1) {
    extend({}, tree.root, {});
    return out;
  }
  for (const EigVertex* v : tree.level(k - 1)) extend(v->label, v->items, v->chain);
  return out;
}

namespace {

bool chain_ok(const EigVertex& v, const SignatureRegistry& reg) {
  if (v.chain.size() != v.label.size()) return false;
  const std::string tail = items_payload(v.items);
  std::string head = "eig";
  for (std::size_t t = 0; t < v.label.size(); ++t) {
    head += "/" + std::to_string(v.label[t]);
    if (v.chain[t].signer != v.label[t]) return false;
    if (!reg.verify(v.chain[t], head + tail)) return false;
  }
  return true;
}

}  // namespace

void eig_round(EigTree& tree, std::size_t k, const std::vector<EigInbound>& inbound, const SignatureRegistry& reg) {
  for (const auto& msg : inbound) {
    for (const auto& v : msg.vertices) {
      if (v.label.size() != k || v.label.back() != msg.from) continue;
      std::set<NodeId> ids(v.label.begin(), v.label.end());
      if (ids.size() != v.label.size() || ids.contains(tree.owner)) continue;
      if (tree.vertices.contains(v.label)) continue;
      if (!chain_ok(v, reg)) continue;
      tree.vertices.emplace(v.label, v);
    }
  }
}

std::map<std::string, Item> eig_decide(const EigTree& tree, const SignatureRegistry& reg, const ItemCheck& admissible) {
  std::map<std::string, std::vector<Item>> seen;
  auto take = [&](const Item& it) {
    if (!it.valid(reg)) return;
    if (admissible && !admissible(it)) return;
    auto& bucket = seen[it.key];
    if (std::find(bucket.begin(), bucket.end(), it) == bucket.end()) bucket.push_back(it);
  };
  for (const auto& it : tree.root) take(it);
  for (const auto& [label, v] : tree.vertices)
    for (const auto& it : v.items) take(it);
  std::map<std::string, Item> out;
  for (auto& [key, bucket] : seen)
    if (bucket.size() == 1) out.emplace(key, bucket.front());
  return out;
}

std::string LinkHalf::body() const {
  json j;
  j["kind"] = "link-half";
  j["owner"] = owner;
  j["peer"] = peer;
  j["skew"] = to_string(skew);
  j["offset"] = to_string(offset);
  j["span"] = to_string(span);
  j["claimed_in"] = claimed_in;
  return j.dump();
}

std::optional<LinkHalf> LinkHalf::parse(const std::string& body) {
  try {
    json j = json::parse(body);
    if (j.at("kind") != "link-half") return std::nullopt;
    LinkHalf h;
    h.owner = j.at("owner").get<NodeId>();
    h.peer = j.at("peer").get<NodeId>();
    h.skew = parse_rational(j.at("skew").get<std::string>());
    h.offset = parse_rational(j.at("offset").get<std::string>());
    h.span = parse_rational(j.at("span").get<std::string>());
    h.claimed_in = j.at("claimed_in").get<std::vector<double>>();
    return h;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string LinkCertificate::key(NodeId u, NodeId v) {
  return "link:" + std::to_string(std::min(u, v)) + "-" + std::to_string(std::max(u, v));
}

Item LinkCertificate::to_item(const SignedPart& low_part, const SignedPart& high_part) const {
  return {key(low.owner, high.owner), {low_part, high_part}};
}

std::optional<LinkCertificate> LinkCertificate::from_item(const Item& item) {
  if (item.parts.size() != 2) return std::nullopt;
  auto lo = LinkHalf::parse(item.parts[0].body);
  auto hi = LinkHalf::parse(item.parts[1].body);
  if (!lo || !hi) return std::nullopt;
  if (item.parts[0].signer != lo->owner || item.parts[1].signer != hi->owner) return std::nullopt;
  if (lo->owner >= hi->owner || lo->peer != hi->owner || hi->peer != lo->owner) return std::nullopt;
  if (item.key != key(lo->owner, hi->owner)) return std::nullopt;
  if (lo->skew <= 0 || hi->skew <= 0) return std::nullopt;
  return LinkCertificate{*lo, *hi};
}

}  // namespace adhoc
