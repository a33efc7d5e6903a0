#include "adhoc/crypto.hpp"

#include <cstdio>
#include <stdexcept>

namespace adhoc {

std::uint64_t digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex_digest(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest(bytes)));
  return buf;
}

SigningKey SignatureRegistry::issue(NodeId node) {
  if (!issued_.insert(node).second) throw std::logic_error("signing key for node " + std::to_string(node) + " already issued");
  return SigningKey(node);
}

Signature SignatureRegistry::sign(const SigningKey& key, std::string_view payload) {
  Signature s{key.owner(), digest(payload)};
  signed_.insert({s.signer, s.digest});
  return s;
}

bool SignatureRegistry::verify(const Signature& sig, std::string_view payload) const {
  return sig.digest == digest(payload) && signed_.contains({sig.signer, sig.digest});
}

}  // namespace adhoc
