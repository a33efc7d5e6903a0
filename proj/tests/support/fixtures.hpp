#pragma once

#include "adhoc/engine.hpp"

#include <random>

namespace adhoc::testing {

inline ClockParams desk_clock() {
  ClockParams p;
  p.a_max = Rational(11, 10);
  p.u0 = 10;
  p.quantum = Rational(1, 64);
  p.k_delay = Rational(5, 2);
  return p;
}

/// Three nodes on a line: 1 and 2 close together, bad node 3 far away, so
/// link 3->2 is much slower than link 1->2.
inline Scenario example_one(const std::string& adversary = "AlwaysConform") {
  Scenario s;
  s.name = "example1";
  s.n = 3;
  s.bad = {3};
  s.adversary = adversary;
  s.clock = desk_clock();
  s.clocks = seeded_clocks(3, s.clock, 1);
  GeometricRadio r;
  r.lambda = {1.0, 8.0};
  r.sinr_threshold = {2.0, 1000.0};
  r.noise = 1e-4;
  r.path_loss = 2.0;
  s.model = geometric_model({{0, 0}, {1, 0}, {71, 0}}, r, s.bad);
  s.utility.family = UtilityFamily::MinFairness;
  s.utility.weights = {{{1, 2}, 1.0}, {{3, 2}, 1.0}};
  return s;
}

inline CtvEntry link_entry(int n, const std::vector<std::tuple<NodeId, NodeId, double>>& links) {
  CtvEntry e;
  e.modes = Ctv(n);
  e.rates = zero_rates(n);
  for (auto [i, j, r] : links) {
    rate(e.rates, i, j) = r;
    e.modes[i - 1] = Mode::transmit(j, r);
    e.modes[j - 1] = Mode::listen();
  }
  e.jammed = e.rates;
  e.label = describe(e.modes);
  return e;
}

/// Every ordered pair has its own single-link entry at `r`.
inline Scenario full_mesh(int n, const NodeSet& bad, const std::string& adversary, double r = 2.0) {
  Scenario s;
  s.name = "mesh-" + std::to_string(n);
  s.n = n;
  s.bad = bad;
  s.adversary = adversary;
  s.clock = desk_clock();
  s.clocks = seeded_clocks(n, s.clock, 3);
  s.model.n = n;
  s.model.lambda = {r};
  s.model.entries.push_back(link_entry(n, {}));
  for (NodeId i = 1; i <= n; ++i)
    for (NodeId j = 1; j <= n; ++j)
      if (i != j) {
        CtvEntry e = link_entry(n, {{i, j, r}});
        e.jammed = default_jammed(e.rates, bad);
        s.model.entries.push_back(e);
      }
  s.utility.weights = {{{1, 2}, 1.0}};
  return s;
}

/// Random explicit table: a silent entry, single links, and (n = 4) pairs
/// of disjoint links. Every audible link is audible both ways, and the good
/// nodes form a bidirectional chain. Jamming kills every link touching a bad
/// node and, with probability 1/3, good-good links off the chain, so the
/// chain survives any disable set.
inline Scenario random_instance(std::uint64_t seed, int n, const NodeSet& bad, std::size_t max_entries = 16) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_rate(0, 2);
  std::bernoulli_distribution present(0.6), spoil(1.0 / 3);
  const double rates[] = {1.0, 2.0, 4.0};

  Scenario s;
  s.name = "random-" + std::to_string(seed);
  s.n = n;
  s.bad = bad;
  s.seed = seed;
  s.clock = desk_clock();
  s.clocks = seeded_clocks(n, s.clock, seed);
  s.model.n = n;
  s.model.lambda = {1.0, 2.0, 4.0};

  std::vector<NodeId> good;
  for (NodeId i = 1; i <= n; ++i)
    if (!bad.contains(i)) good.push_back(i);
  std::vector<std::pair<NodeId, NodeId>> links;
  for (std::size_t k = 0; k + 1 < good.size(); ++k) {
    links.push_back({good[k], good[k + 1]});
    links.push_back({good[k + 1], good[k]});
  }
  const auto chain_size = links.size();
  for (NodeId i = 1; i <= n; ++i)
    for (NodeId j = i + 1; j <= n; ++j) {
      if (std::find(links.begin(), links.end(), std::pair{i, j}) != links.end()) continue;
      if (present(rng)) {
        links.push_back({i, j});
        links.push_back({j, i});
      }
    }
  const std::vector<std::pair<NodeId, NodeId>> chain(links.begin(), links.begin() + chain_size);
  std::shuffle(links.begin(), links.end(), rng);

  std::vector<CtvEntry> entries{link_entry(n, {})};
  for (auto [i, j] : links) entries.push_back(link_entry(n, {{i, j, rates[pick_rate(rng)]}}));
  if (n == 4)
    for (std::size_t a = 0; a < links.size(); ++a)
      for (std::size_t b = a + 1; b < links.size(); ++b) {
        const auto [i, j] = links[a];
        const auto [k, l] = links[b];
        if (NodeSet{i, j, k, l}.size() == 4 && present(rng) && present(rng))
          entries.push_back(link_entry(n, {{i, j, rates[pick_rate(rng)]}, {k, l, rates[pick_rate(rng)]}}));
      }
  // the chain links come first so truncation never breaks connectivity
  std::stable_partition(entries.begin() + 1, entries.end(), [&](const CtvEntry& e) {
    for (std::size_t k = 0; k + 1 < good.size(); ++k)
      if (rate(e.rates, good[k], good[k + 1]) > 0 || rate(e.rates, good[k + 1], good[k]) > 0) return true;
    return false;
  });
  if (entries.size() > max_entries) entries.resize(max_entries);
  for (auto& e : entries) {
    for (NodeId i = 1; i <= n; ++i)
      for (NodeId j = 1; j <= n; ++j) {
        if (rate(e.rates, i, j) <= 0) continue;
        const bool on_chain = std::find(chain.begin(), chain.end(), std::pair{i, j}) != chain.end();
        if (bad.contains(i) || bad.contains(j) || (!bad.empty() && !on_chain && spoil(rng))) rate(e.jammed, i, j) = 0;
      }
  }
  s.model.entries = entries;

  std::bernoulli_distribution fair(0.5);
  s.utility.family = fair(rng) ? UtilityFamily::MinFairness : UtilityFamily::WeightedSum;
  std::uniform_int_distribution<int> node(1, n);
  while (s.utility.weights.size() < 2) {
    const NodeId i = node(rng), j = node(rng);
    if (i != j) s.utility.weights[{i, j}] = 1.0;
  }
  return s;
}

}  // namespace adhoc::testing
