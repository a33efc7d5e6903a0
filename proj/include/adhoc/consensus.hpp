#pragma once

#include "adhoc/crypto.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace adhoc {

/// One signer's contribution to an item.
struct SignedPart {
  NodeId signer{0};
  std::string body;
  Signature sig;

  friend bool operator==(const SignedPart&, const SignedPart&) = default;
};

/// A self-certifying payload element. Items sharing a key but differing in
/// content conflict and are all discarded at decision time.
struct Item {
  std::string key;
  std::vector<SignedPart> parts;

  /// Every part carries its own signer's signature over its body, and no
  /// signer appears twice.
  bool valid(const SignatureRegistry& reg) const;
  std::string canonical() const;
  friend bool operator==(const Item&, const Item&) = default;
};

SignedPart sign_part(SignatureRegistry& reg, const SigningKey& key, std::string body);

using Label = std::vector<NodeId>;

struct EigVertex {
  Label label;                 // relays, oldest first
  std::vector<Item> items;
  std::vector<Signature> chain;  // chain[t] by label[t] over (label[0..t], items)
};

/// Exponential information gathering tree of one node. Absent vertices are
/// simply not stored.
struct EigTree {
  NodeId owner{0};
  int n{0};
  std::vector<Item> root;
  std::map<Label, EigVertex> vertices;

  std::vector<const EigVertex*> level(std::size_t k) const;
};

/// Bytes signed by the relay at position t of a chain.
std::string chain_payload(const Label& prefix, const std::vector<Item>& items);

/// Vertices the owner relays in round k (its level k-1), each extended by the
/// owner's chain signature.
std::vector<EigVertex> eig_outbound(const EigTree& tree, std::size_t k, SignatureRegistry& reg,
                                    const SigningKey& key);

struct EigInbound {
  NodeId from{0};
  std::vector<EigVertex> vertices;
};

/// Stores level-k vertices from each neighbor's relayed level-(k-1) vertices.
/// A vertex with a bad chain, a repeated id, the owner's id, or a label
/// that does not end with the sending neighbor is dropped. Items are kept as
/// relayed (the chain covers them) and filtered at decision time.
void eig_round(EigTree& tree, std::size_t k, const std::vector<EigInbound>& inbound, const SignatureRegistry& reg);

/// Kind-specific admission (e.g. a link item must be signed by both
/// endpoints). Applied before conflict detection so a stranger cannot
/// knock out an item by signing a rival under the same key.
using ItemCheck = std::function<bool(const Item&)>;

/// Union of valid, admissible items seen anywhere in the tree, minus every
/// key carried by two or more distinct items.
std::map<std::string, Item> eig_decide(const EigTree& tree, const SignatureRegistry& reg,
                                       const ItemCheck& admissible = {});

// -- link certificates ------------------------------------------------------

/// One endpoint's view of a link: its clock against the peer's
/// (tau_owner = skew * tau_peer + offset) and the rates it claims to receive
/// from the peer under each CTV entry.
struct LinkHalf {
  NodeId owner{0};
  NodeId peer{0};
  Rational skew{1};
  Rational offset{0};
  /// Owner-clock distance between the two timing packets behind the estimate.
  Rational span{0};
  std::vector<double> claimed_in;

  std::string body() const;
  static std::optional<LinkHalf> parse(const std::string& body);
  friend bool operator==(const LinkHalf&, const LinkHalf&) = default;
};

struct LinkCertificate {
  LinkHalf low;   // owner is the smaller id
  LinkHalf high;

  static std::string key(NodeId u, NodeId v);
  Item to_item(const SignedPart& low_part, const SignedPart& high_part) const;
  /// Parses an item carrying two well-formed halves of one link.
  static std::optional<LinkCertificate> from_item(const Item& item);
};

}  // namespace adhoc
