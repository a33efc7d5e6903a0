#pragma once

#include "adhoc/model.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <utility>

namespace adhoc {

/// 64-bit FNV-1a; stable across platforms so traces stay byte-identical.
std::uint64_t digest(std::string_view bytes);
std::string hex_digest(std::string_view bytes);

struct Signature {
  NodeId signer{0};
  std::uint64_t digest{0};

  friend bool operator==(const Signature&, const Signature&) = default;
  friend auto operator<=>(const Signature&, const Signature&) = default;
};

class SignatureRegistry;

/// Capability to sign as one node. Only the registry mints keys; the engine
/// hands bad nodes' keys to the adversary and keeps good nodes' keys private.
class SigningKey {
 public:
  NodeId owner() const { return owner_; }

 private:
  friend class SignatureRegistry;
  explicit SigningKey(NodeId owner) : owner_(owner) {}
  NodeId owner_;
};

/// Ideal signatures: verify succeeds iff the signer's key was used on
/// exactly these bytes.
class SignatureRegistry {
 public:
  SigningKey issue(NodeId node);
  Signature sign(const SigningKey& key, std::string_view payload);
  bool verify(const Signature& sig, std::string_view payload) const;
  std::size_t size() const { return signed_.size(); }

 private:
  std::set<NodeId> issued_;
  std::set<std::pair<NodeId, std::uint64_t>> signed_;
};

}  // namespace adhoc
