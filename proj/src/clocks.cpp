#include "adhoc/clocks.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace adhoc {

SkewEstimate estimate_skew(const TimingExchange& x, NodePair edge) {
  if (x.s2 == x.s1) throw DegenerateExchange("timing exchange has equal send stamps");
  if (x.s2 < x.s1) throw DegenerateExchange("timing exchange send stamps out of order");
  SkewEstimate out;
  out.a_hat = (x.r2 - x.r1) / (x.s2 - x.s1);
  out.b_hat = x.r1 - out.a_hat * x.s1;
  out.edge = edge;
  return out;
}

Rational skew_estimate_error(const Rational& span, const Rational& quantum, const Rational& a_bound) {
  return (1 + a_bound) * quantum / span;
}

std::vector<NodeId> ClockTopology::neighbors(NodeId u) const {
  std::vector<NodeId> out;
  for (auto it = maps.lower_bound({u, std::numeric_limits<NodeId>::min()}); it != maps.end() && it->first.first == u;
       ++it) {
    if (maps.contains({it->first.second, u})) out.push_back(it->first.second);
  }
  return out;
}

std::set<NodePair> ClockTopology::links() const {
  std::set<NodePair> out;
  for (const auto& [key, m] : maps) {
    auto [u, v] = key;
    if (u < v && maps.contains({v, u})) out.insert({u, v});
  }
  return out;
}

Rational skew_product(const ClockTopology& topo, const Cycle& cycle) {
  Rational p(1);
  for (std::size_t k = 0; k < cycle.size(); ++k) p *= topo.map(cycle[k], cycle[(k + 1) % cycle.size()]).skew;
  return p;
}

namespace {

Cycle canonical(const ClockTopology& topo, Cycle c) {
  if (skew_product(topo, c) > 1) std::reverse(c.begin(), c.end());
  std::rotate(c.begin(), std::min_element(c.begin(), c.end()), c.end());
  return c;
}

std::vector<NodeId> sorted_nodes(Cycle c) {
  std::sort(c.begin(), c.end());
  return c;
}

}  // namespace

std::vector<Cycle> find_inconsistent_cycles(const ClockTopology& topo, const Rational& eps_a) {
  std::vector<Cycle> found;
  auto inconsistent = [&](const Cycle& c) {
    Rational p = skew_product(topo, c);
    if (p <= 0) return true;
    return (p < 1 ? 1 / p : p) - 1 > eps_a;
  };

  const auto links = topo.links();
  for (const auto& [u, v] : links) {
    Cycle c{u, v};
    if (inconsistent(c)) found.push_back(canonical(topo, c));
  }

  NodeSet nodes;
  for (const auto& [u, v] : links) {
    nodes.insert(u);
    nodes.insert(v);
  }
  std::map<NodeId, NodeId> parent;
  std::map<NodeId, int> depth;
  std::set<NodePair> tree;
  for (NodeId root : nodes) {
    if (parent.contains(root)) continue;
    parent[root] = root;
    depth[root] = 0;
    std::queue<NodeId> frontier;
    frontier.push(root);
    while (!frontier.empty()) {
      NodeId u = frontier.front();
      frontier.pop();
      for (NodeId v : topo.neighbors(u)) {
        if (parent.contains(v)) continue;
        parent[v] = u;
        depth[v] = depth[u] + 1;
        tree.insert({std::min(u, v), std::max(u, v)});
        frontier.push(v);
      }
    }
  }

  for (const auto& [u, v] : links) {
    if (tree.contains({u, v})) continue;
    std::vector<NodeId> up_u{u}, up_v{v};
    NodeId a = u, b = v;
    while (depth[a] > depth[b]) up_u.push_back(a = parent[a]);
    while (depth[b] > depth[a]) up_v.push_back(b = parent[b]);
    while (a != b) {
      up_u.push_back(a = parent[a]);
      up_v.push_back(b = parent[b]);
    }
    Cycle c = up_u;
    for (auto it = up_v.rbegin() + 1; it != up_v.rend(); ++it) c.push_back(*it);
    if (inconsistent(c)) found.push_back(canonical(topo, c));
  }

  std::sort(found.begin(), found.end(), [](const Cycle& x, const Cycle& y) {
    auto sx = sorted_nodes(x), sy = sorted_nodes(y);
    return sx != sy ? sx < sy : x < y;
  });
  return found;
}

Rational consistency_start_time(int n, const ClockParams& params) {
  Rational power(1);
  for (int k = 0; k < n + 1; ++k) power *= params.a_max;
  return ((n + 1) * power + (n + 1) * power * params.u0) / params.eps_a;
}

Rational cycle_start_bound(const Rational& a_hat_to_istar, int m, const ClockParams& params) {
  return (a_hat_to_istar * (m + 1) * params.k_delay + params.eps_b) / params.eps_a;
}

MinProductNode min_product_node(const std::vector<DeclaredMap>& chain) {
  Rational prefix(1), best(1), total(1);
  std::size_t best_index = 0;
  for (std::size_t k = 0; k < chain.size(); ++k) {
    prefix *= chain[k].skew;
    if (prefix < best) {
      best = prefix;
      best_index = k + 1;
    }
  }
  total = prefix;
  return {best_index, total / best};
}

CycleTrace CycleTrace::empty(const Cycle& cycle, int laps) {
  CycleTrace t;
  t.cycle = cycle;
  const std::size_t m = cycle.size();
  t.hops.resize(laps * m + 1);
  for (std::size_t p = 0; p < t.hops.size(); ++p) t.hops[p].node = cycle[p % m];
  return t;
}

namespace {

NodePair norm(NodeId u, NodeId v) { return {std::min(u, v), std::max(u, v)}; }

}  // namespace

ConsistencyVerdict run_cycle_check(const CycleTrace& trace, const ClockTopology& declared,
                                   const ClockParams& params) {
  ConsistencyVerdict out;
  const auto& hops = trace.hops;
  if (hops.size() < 2) return out;
  auto blame = [&](NodeId u, NodeId v, Violation why) {
    out.failed_links.insert(norm(u, v));
    out.violations.push_back({norm(u, v), why});
  };

  if (!hops[0].sent) {
    blame(hops[0].node, hops[1].node, Violation::Timeout);
    out.incomplete = true;
    return out;
  }
  for (std::size_t p = 1; p < hops.size(); ++p) {
    const NodeId u = hops[p - 1].node;
    const NodeId v = hops[p].node;
    if (!hops[p].received) {
      blame(u, v, Violation::Timeout);
      out.incomplete = true;
      return out;
    }
    const Rational expected = declared.map(u, v).apply(*hops[p - 1].sent);
    if (abs_value(Rational(*hops[p].received - expected)) > params.eps_b) blame(u, v, Violation::SkewConsistency);
    if (p + 1 == hops.size()) break;

    const NodeId w = hops[p + 1].node;
    if (!hops[p].sent) {
      blame(v, w, Violation::Timeout);
      out.incomplete = true;
      return out;
    }
    const Rational hold = *hops[p].sent - *hops[p].received;
    if (hold > params.k_delay || hold < 0) {
      const Violation why = hold < 0 ? Violation::Causality : Violation::DelayBound;
      blame(u, v, why);
      blame(v, w, why);
    }
  }
  return out;
}

DeclaredMap compose(const std::vector<DeclaredMap>& chain) {
  DeclaredMap out;
  for (const auto& m : chain) {
    out.offset = m.skew * out.offset + m.offset;
    out.skew = m.skew * out.skew;
  }
  return out;
}

Rational delay_sum_lower_bound(const DeclaredMap& truth, const DeclaredMap& declared,
                               const Rational& a_hat_to_istar, const Rational& tau1) {
  return ((truth.skew - declared.skew) * tau1 + (truth.offset - declared.offset)) / a_hat_to_istar;
}

Rational delay_sum_lower_bound(const std::vector<DeclaredMap>& chain, const DeclaredMap& truth,
                               const Rational& tau1) {
  return delay_sum_lower_bound(truth, compose(chain), min_product_node(chain).skew_to_end, tau1);
}

std::map<NodeId, Rational> reference_clock(const ClockTopology& topo, const NodeSet& nodes) {
  std::map<NodeId, Rational> out;
  if (nodes.empty()) return out;
  const NodeId root = *nodes.begin();
  // BFS with ascending neighbour order yields the lexicographically smallest
  // shortest path from the root.
  out[root] = Rational(1);
  std::queue<NodeId> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : topo.neighbors(u)) {
      if (out.contains(v)) continue;
      // tau_root = out[u] * tau_u and tau_u = map(v, u) tau_v
      out[v] = out[u] * topo.map(v, u).skew;
      frontier.push(v);
    }
  }
  for (NodeId i : nodes)
    if (!out.contains(i)) throw Disconnected("no surviving path from node " + std::to_string(i) + " to the reference");
  return out;
}

}  // namespace adhoc
