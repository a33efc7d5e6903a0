#include "adhoc/engine.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>
#include <sstream>

namespace adhoc {

using nlohmann::json;

namespace {

Rational ceil_q(const Rational& x, const Rational& q) { return Rational(ceil_int(x / q)) * q; }

NodePair norm(NodeId u, NodeId v) { return {std::min(u, v), std::max(u, v)}; }

json pair_list(const std::vector<NodePair>& v) {
  json out = json::array();
  for (const auto& [a, b] : v) out.push_back({a, b});
  return out;
}

json node_list(const NodeSet& s) { return json(std::vector<NodeId>(s.begin(), s.end())); }

}  // namespace

// -- scenario ---------------------------------------------------------------

NodeSet Scenario::good() const {
  NodeSet g;
  for (NodeId i = 1; i <= n; ++i)
    if (!bad.contains(i)) g.insert(i);
  return g;
}

void Scenario::validate() const {
  if (n < 2) throw ConfigInvalid("n", "need at least two nodes");
  for (NodeId b : bad)
    if (b < 1 || b > n) throw ConfigInvalid("bad", "node " + std::to_string(b) + " outside 1.." + std::to_string(n));
  if (good().empty()) throw ConfigInvalid("bad", "no good nodes left");
  if (!bad.empty() && adversary.empty()) throw ConfigInvalid("adversary", "bad nodes need a strategy");
  if (packet <= 0) throw ConfigInvalid("packet", "must be positive");
  if (clock.k_delay < clock.a_max * packet + 2 * clock.quantum)
    throw ConfigInvalid("clocks.k_delay", "must cover a_max * packet + 2 * quantum");
  try {
    clock.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigInvalid("clocks", e.what());
  }
  if (static_cast<int>(clocks.size()) != n) throw ConfigInvalid("clocks", "need one clock per node");
  if (!clocks_within_bounds(clocks, good(), clock))
    throw ConfigInvalid("clocks", "good clocks exceed the skew or offset bound");
  if (model.n != n) throw ConfigInvalid("rates", "table is for " + std::to_string(model.n) + " nodes");
  if (model.entries.empty()) throw ConfigInvalid("rates", "empty rate table");
  for (std::size_t e = 0; e < model.size(); ++e) {
    const auto& en = model.entries[e];
    const std::string where = "rates[" + std::to_string(e) + "]";
    if (static_cast<int>(en.modes.size()) != n) throw ConfigInvalid(where, "CTV must give one mode per node");
    if (en.rates.rows() != n || en.rates.cols() != n || en.jammed.rows() != n || en.jammed.cols() != n)
      throw ConfigInvalid(where, "rate matrices must be n x n");
    if ((en.rates.array() < 0).any() || (en.jammed.array() < 0).any())
      throw ConfigInvalid(where, "rates must be nonnegative");
  }
  if (!half_duplex_ok(model, bad)) throw ConfigInvalid("rates", "a good node both transmits and receives");
  if (utility.weights.empty()) throw ConfigInvalid("utility.weights", "no weighted pairs");
  for (const auto& [pair, w] : utility.weights) {
    const auto& [i, j] = pair;
    if (i < 1 || i > n || j < 1 || j > n || i == j)
      throw ConfigInvalid("utility.weights", "bad pair " + std::to_string(i) + "-" + std::to_string(j));
    if (!(w >= 0)) throw ConfigInvalid("utility.weights", "weights must be nonnegative");
  }
  if (!(eps > 0 && eps < 1)) throw ConfigInvalid("eps", "must lie in (0, 1)");
  try {
    make_strategy(adversary, strategy);
  } catch (const std::invalid_argument& e) {
    throw ConfigInvalid("adversary.strategy", e.what());
  }
  // the good nodes must stay connected even with every jammable CTV disabled
  const auto jammable = jammable_entries(model, bad);
  EnabledSet survivors;
  for (std::size_t e = 0; e < model.size(); ++e)
    if (std::find(jammable.begin(), jammable.end(), e) == jammable.end()) survivors.push_back(e);
  good_component(enabled_graph(model, survivors), good());
}

std::vector<AffineClock> seeded_clocks(int n, const ClockParams& params, std::uint64_t seed, int steps) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> grid(0, steps);
  std::vector<AffineClock> out;
  for (int i = 0; i < n; ++i) {
    const Rational s = 1 + (params.a_max - 1) * Rational(grid(rng), steps);
    // a clock started s <= U0 before the reference reads s * skew at time 0
    const Rational o = s * params.u0 * Rational(grid(rng), steps);
    out.push_back({s, o});
  }
  return out;
}

// -- channel ----------------------------------------------------------------

ChannelOutcome resolve_channel(const RateModel& model, std::size_t ctv, const NodeSet& jamming,
                               const NodeSet& transmitting, const RateMatrix& claimed) {
  const CtvEntry& e = model.entries.at(ctv);
  ChannelOutcome out;
  out.realized = jamming.empty() ? e.rates : e.jammed;
  for (NodeId i = 1; i <= model.n; ++i)
    for (NodeId j = 1; j <= model.n; ++j) {
      if (i == j || rate(claimed, i, j) <= 0) continue;
      const bool sent = transmitting.contains(i);
      const bool listening = e.modes[j - 1].kind == ModeKind::Listen;
      const bool fast_enough = rate(out.realized, i, j) >= rate(claimed, i, j) * (1 - 1e-12);
      (sent && listening && fast_enough ? out.delivered : out.lost).push_back({i, j});
    }
  return out;
}

double max_flow(const Matrix<double>& capacity, NodeId s, NodeId d) {
  Matrix<double> cap = capacity;
  const int n = static_cast<int>(cap.rows());
  const int src = s - 1, dst = d - 1;
  double total = 0;
  for (;;) {
    std::vector<int> prev(n, -1);
    prev[src] = src;
    std::queue<int> q;
    q.push(src);
    while (!q.empty() && prev[dst] < 0) {
      const int u = q.front();
      q.pop();
      for (int v = 0; v < n; ++v)
        if (prev[v] < 0 && cap(u, v) > 1e-12) {
          prev[v] = u;
          q.push(v);
        }
    }
    if (prev[dst] < 0) return total;
    double push = std::numeric_limits<double>::infinity();
    for (int v = dst; v != src; v = prev[v]) push = std::min(push, cap(prev[v], v));
    for (int v = dst; v != src; v = prev[v]) {
      cap(prev[v], v) -= push;
      cap(v, prev[v]) += push;
    }
    total += push;
  }
}

// -- outputs ----------------------------------------------------------------

std::string TraceRecord::json_line() const {
  json j;
  j["v"] = kSchema;
  j["t"] = to_string(t);
  j["node"] = node;
  j["phase"] = phase;
  j["kind"] = kind;
  j["outcome"] = outcome;
  if (!digest.empty()) j["digest"] = digest;
  return j.dump();
}

std::string RunResult::trace_jsonl() const {
  std::string out;
  for (const auto& r : trace) {
    out += r.json_line();
    out += '\n';
  }
  return out;
}

std::string Metrics::to_json() const {
  json j;
  j["schema"] = 1;
  j["scenario"] = scenario;
  j["adversary"] = adversary;
  j["seed"] = seed;
  j["params"] = {{"n_iter", params.n_iter},
                 {"dead_time", params.dead_time},
                 {"data_time", params.data_time},
                 {"eps_a", params.eps_a},
                 {"t_life", params.t_life},
                 {"eps_l", params.eps_l},
                 {"eps_d", params.eps_d},
                 {"k_r", params.k_r},
                 {"discovery_time", params.discovery_time},
                 {"quantum", to_string(quantum)},
                 {"eps_a_exact", to_string(eps_a)},
                 {"eps_b", to_string(eps_b)},
                 {"k_delay", to_string(k_delay)},
                 {"check_start", to_string(start)}};
  json nb = json::object();
  for (const auto& [i, s] : neighbors) nb[std::to_string(i)] = node_list(s);
  json cycles = json::array();
  for (const auto& c : checked_cycles) cycles.push_back(c);
  j["discovery"] = {{"deliveries", deliveries},
                    {"cross_stage", cross_stage},
                    {"missed_windows", missed_windows},
                    {"stages", stages},
                    {"end_local", to_string(discovery_end)},
                    {"steady_start", steady_start},
                    {"neighbors", nb},
                    {"links_decided", pair_list(links_decided)},
                    {"removed_two_cycles", pair_list(removed_two_cycles)},
                    {"checked_cycles", cycles},
                    {"removed_by_check", pair_list(removed_by_check)},
                    {"links_final", pair_list(links_final)},
                    {"views_agree", views_agree}};
  json prunes = json::array();
  for (const auto& p : prune_history)
    prunes.push_back({{"iteration", p.iteration}, {"failed", p.failed}, {"remaining", p.remaining}});
  json tp = json::object();
  for (int i = 0; i < throughput.rows(); ++i)
    for (int k = 0; k < throughput.cols(); ++k)
      if (throughput(i, k) > 0) tp[std::to_string(i + 1) + "-" + std::to_string(k + 1)] = throughput(i, k);
  j["steady_state"] = {{"component", node_list(component)},
                       {"prune_history", prunes},
                       {"feasible_initial", feasible_initial},
                       {"feasible_final", feasible_final},
                       {"failure_records", failure_records},
                       {"timing_violations", timing_violations},
                       {"schedules_agree", schedules_agree}};
  j["throughput"] = tp;
  j["utility"] = {{"long_run", utility_long_run},
                  {"steady_mean", utility_steady},
                  {"final_iteration", utility_final_iteration},
                  {"lp_final", lp_final}};
  j["overhead_fraction"] = overhead_fraction;
  j["lifetime"] = lifetime;
  return j.dump(2);
}

// -- engine -----------------------------------------------------------------

struct Engine::Impl {
  static constexpr int kLaps = 2;

  Scenario sc;
  EngineOptions opt;
  std::unique_ptr<AdversaryStrategy> adv;

  SignatureRegistry reg;
  std::vector<Node> nodes;  // index i-1
  NodeSet good;
  Digraph audible;
  ClockParams cp;
  OverheadConstants overhead;
  ProtocolParams params;
  OmcSchedule omc;
  std::vector<StageSpec> specs;
  StagePlan plan;
  Metrics m;
  std::vector<TraceRecord> trace;

  std::map<NodeId, NetworkView> views;
  std::vector<Cycle> cycles;

  bool is_bad(NodeId i) const { return sc.bad.contains(i); }
  const AffineClock& clock(NodeId i) const { return sc.clocks.at(i - 1); }
  Node& node(NodeId i) { return nodes.at(i - 1); }

  void log(const Time& t, NodeId who, Phase ph, const std::string& kind, const std::string& outcome,
           std::string digest = {}) {
    if (opt.keep_trace) trace.push_back({t, who, to_string(ph), kind, outcome, std::move(digest)});
  }

  void setup();
  void choose_quantum();
  void discovery_stage(std::size_t k, MsgKind kind);
  std::map<NodeId, std::map<std::string, Item>> agreement(Phase ph, const std::map<NodeId, std::vector<Item>>& roots,
                                                          const ItemCheck& check,
                                                          const std::function<Time(NodeId, std::size_t)>& when);
  bool same_decisions(const std::map<NodeId, std::map<std::string, Item>>& d) const;
  void network_discovery();
  void settle_check_start();
  std::vector<StampReport> circulate(std::size_t ci, const Cycle& cycle, std::size_t stage);
  void consistency_check();
  void steady_state();
  RunResult run();
};

void Engine::Impl::setup() {
  sc.validate();
  good = sc.good();
  m.scenario = sc.name;
  m.adversary = adv->name();
  m.seed = sc.seed;
  m.throughput = Matrix<double>::Zero(sc.n, sc.n);

  std::vector<RateMatrix> all;
  for (const auto& e : sc.model.entries) all.push_back(e.rates);
  audible = rate_graph(all, sc.n);


  for (NodeId i = 1; i <= sc.n; ++i) {
    RateProbe probe = [this, i](NodeId peer) {
      std::vector<double> heard;
      for (const auto& e : sc.model.entries) heard.push_back(rate(e.rates, peer, i));
      return is_bad(i) ? adv->claim_rates(i, peer, heard) : heard;
    };
    nodes.emplace_back(i, sc.n, reg.issue(i), reg, probe);
  }

  cp = sc.clock;
  const double a = to_double(cp.a_max);
  overhead = OverheadConstants::defaults(sc.n, a, to_double(cp.k_delay));
  if (sc.params) {
    params = *sc.params;
  } else {
    params = select_parameters(sc.n, a, to_double(cp.u0), static_cast<int>(sc.model.size()), sc.eps, overhead);
  }
  // dyadic eps_a keeps the exact arithmetic small
  Rational eps_a(1);
  const Rational target = to_rational(params.eps_a);
  while (eps_a > target) eps_a /= 2;
  cp.eps_a = eps_a;
  params.eps_a = to_double(eps_a);
  m.eps_a = eps_a;
  m.k_delay = cp.k_delay;
  choose_quantum();

  AdversaryContext ctx;
  ctx.n = sc.n;
  ctx.bad = sc.bad;
  ctx.model = &sc.model;
  ctx.clocks = sc.clocks;
  ctx.params = cp;
  ctx.audible = audible;
  ctx.seed = sc.seed;
  adv->bind(ctx);
}

void Engine::Impl::choose_quantum() {
  // readings grow by about a^2 per stage across the checks; the skew estimate
  // error times the largest reading must stay well below eps_a * START
  const int n = sc.n;
  const int max_cycles = std::max(1, n * (n - 1) / 2 - n + 1);
  Rational growth(2);
  for (int k = 0; k < 2 * max_cycles + 1; ++k) growth *= cp.a_max;
  omc = build_omc(n, cp.a_max, cp.quantum, sc.packet);
  const Rational span = omc.t_mac / 2;
  while (skew_estimate_error(span, cp.quantum, cp.a_max) * cp.a_max * growth > cp.eps_a / 4) cp.quantum /= 2;
  omc = build_omc(n, cp.a_max, cp.quantum, sc.packet);
  m.quantum = cp.quantum;

  specs.clear();
  for (MsgKind k : kDiscoveryStages)
    specs.push_back({to_string(k), k == MsgKind::TIM1 ? 2 * omc.t_mac : omc.t_mac, 0});
  for (int r = 0; r < n; ++r) specs.push_back({"EIG-links", omc.t_mac, 0});
  plan = stage_plan(0, specs, cp);
}

void Engine::Impl::discovery_stage(std::size_t k, MsgKind kind) {
  struct Delivery {
    NodeId from;
    Message msg;
    Rational reading;
    Time t;
  };
  std::vector<Message> out;
  for (NodeId i = 1; i <= sc.n; ++i) out.push_back(node(i).discovery_outbound(kind));

  std::vector<OmcEmitter> emitters;
  for (NodeId i = 1; i <= sc.n; ++i) emitters.push_back({i - 1, clock(i)});

  std::vector<Delivery> pending;
  EventQueue queue;
  const std::size_t kEnd = std::numeric_limits<std::size_t>::max();
  for (NodeId s = 1; s <= sc.n; ++s) {
    std::vector<OmcEmitter> others;
    for (NodeId o = 1; o <= sc.n; ++o)
      if (o != s) others.push_back(emitters[o - 1]);
    const Time from = clock(s).when(plan.send_time(k));
    auto x = first_clear_window(omc, emitters[s - 1], others, {}, from, from + omc.t_mac);
    if (!x) {
      ++m.missed_windows;
      log(from, s, Phase::NeighborDiscovery, to_string(kind), "no-window");
      continue;
    }
    const Rational sigma = ceil_q(clock(s).exact(*x), cp.quantum);
    const Time t = clock(s).when(sigma);
    for (NodeId j = 1; j <= sc.n; ++j) {
      if (j == s || !audible.has(s, j)) continue;
      Message msg = out[s - 1];
      if (kind == MsgKind::TIM1 || kind == MsgKind::TIM2) msg.stamp = is_bad(s) ? adv->presented_reading(s, j, t) : sigma;
      if (is_bad(s)) {
        auto tampered = adv->on_message({s, j, kind, t}, msg);
        if (!tampered) {
          log(t, s, Phase::NeighborDiscovery, to_string(kind), "withheld");
          continue;
        }
        msg = *tampered;
      }
      const Rational reading = is_bad(j) ? adv->presented_reading(j, s, t) : clock(j).read(t, cp.quantum);
      pending.push_back({s, std::move(msg), reading, t});
      queue.push(t, j, pending.size() - 1);
    }
  }
  for (NodeId j = 1; j <= sc.n; ++j) queue.push(clock(j).when(plan.bounds[k + 1]), j, kEnd);

  std::vector<bool> ended(sc.n + 1, false);
  while (!queue.empty()) {
    const Event ev = queue.pop();
    if (ev.payload == kEnd) {
      ended[ev.target] = true;
      continue;
    }
    const Delivery& d = pending[ev.payload];
    const NodeId j = ev.target;
    const auto at_start = plan.stage_of(clock(j).read(d.t, cp.quantum));
    const auto at_end = plan.stage_of(clock(j).read(d.t + sc.packet, cp.quantum));
    if (ended[j] || at_start != k || at_end != k) {
      ++m.cross_stage;
      log(d.t, j, Phase::NeighborDiscovery, to_string(kind), "cross-stage", d.msg.digest());
      continue;
    }
    node(j).discovery_receive(d.msg, d.reading);
    ++m.deliveries;
    log(d.t, j, Phase::NeighborDiscovery, to_string(kind), "from " + std::to_string(d.from), d.msg.digest());
  }
  for (NodeId i = 1; i <= sc.n; ++i) node(i).discovery_end(kind);
}

std::map<NodeId, std::map<std::string, Item>> Engine::Impl::agreement(
    Phase ph, const std::map<NodeId, std::vector<Item>>& roots, const ItemCheck& check,
    const std::function<Time(NodeId, std::size_t)>& when) {
  for (NodeId i = 1; i <= sc.n; ++i) {
    auto it = roots.find(i);
    node(i).eig_begin(ph, it == roots.end() ? std::vector<Item>{} : it->second);
  }
  const std::string kind = ph == Phase::Verification ? "VRFY" : "EIG";
  for (std::size_t r = 1; r <= static_cast<std::size_t>(sc.n); ++r) {
    std::map<NodeId, std::vector<EigInbound>> inbox;
    for (NodeId u = 1; u <= sc.n; ++u) {
      auto outbound = node(u).eig_outbound(r);
      std::size_t relayed = 0;
      for (NodeId v : node(u).neighbors()) {
        auto sent = is_bad(u) ? adv->on_eig(u, v, ph, r, outbound) : outbound;
        relayed += sent.size();
        inbox[v].push_back({u, std::move(sent)});
      }
      log(when(u, r), u, ph, kind, "round " + std::to_string(r) + " relayed " + std::to_string(relayed));
    }
    for (NodeId v = 1; v <= sc.n; ++v) node(v).eig_receive(r, inbox[v]);
  }
  std::map<NodeId, std::map<std::string, Item>> decided;
  for (NodeId g : good) decided[g] = node(g).eig_decide(check);
  return decided;
}

bool Engine::Impl::same_decisions(const std::map<NodeId, std::map<std::string, Item>>& d) const {
  if (d.empty()) return true;
  const auto& first = d.begin()->second;
  for (const auto& [g, items] : d)
    if (items != first) return false;
  return true;
}

void Engine::Impl::network_discovery() {
  DiscoveryLimits limits;
  limits.a_max = cp.a_max;
  limits.min_span = omc.t_mac / 2;
  std::map<NodeId, std::vector<Item>> roots;
  for (NodeId i = 1; i <= sc.n; ++i)
    for (const auto& [peer, item] : node(i).certificates()) roots[i].push_back(item);
  const std::size_t first = std::size(kDiscoveryStages);
  auto when = [&](NodeId u, std::size_t r) { return clock(u).when(plan.send_time(first + r - 1)); };
  auto decided = agreement(Phase::NetworkDiscovery, roots, [&](const Item& it) { return admissible_certificate(it, limits); },
                           when);
  m.views_agree = same_decisions(decided);
  for (const auto& [g, items] : decided) views[g] = view_from_certificates(items, sc.n);
  const NetworkView& v0 = views.at(*good.begin());
  for (const auto& [link, cert] : v0.certificates) m.links_decided.push_back(link);

  // a link whose halves disagree is its own inconsistent cycle
  auto flagged = find_inconsistent_cycles(v0.topology, cp.eps_a);
  for (const auto& c : flagged) {
    if (c.size() == 2) {
      m.removed_two_cycles.push_back(norm(c[0], c[1]));
    }
  }
  for (auto& [g, view] : views)
    for (const auto& link : m.removed_two_cycles) view.remove_link(link);
  const NetworkView& v1 = views.at(*good.begin());
  cycles = find_inconsistent_cycles(v1.topology, cp.eps_a);
  std::erase_if(cycles, [](const Cycle& c) { return c.size() < 3; });
  m.checked_cycles = cycles;
}

void Engine::Impl::settle_check_start() {
  const NetworkView& v = views.at(*good.begin());
  const Rational err = v.certificates.empty() ? Rational(0) : skew_estimate_error(v.min_span(), cp.quantum, cp.a_max);

  // largest declared skew product over any stretch of a circulation
  std::vector<Rational> a_hat;
  for (const auto& c : cycles) {
    const std::size_t L = kLaps * c.size() + 1;
    Rational best(1);
    for (std::size_t s = 0; s + 1 < L; ++s) {
      Rational prod(1);
      for (std::size_t e = s + 1; e < L; ++e) {
        prod *= v.topology.map(c[(e - 1) % c.size()], c[e % c.size()]).skew;
        best = std::max(best, prod);
      }
    }
    a_hat.push_back(best);
  }

  std::vector<StageSpec> full = specs;
  const std::size_t cc_first = full.size();
  // each flagged cycle gets n stages; the circulation runs in the first
  for (const auto& c : cycles) {
    const Rational hop = sc.packet + cp.k_delay;
    full.push_back({"CCHK", cp.a_max * (kLaps * static_cast<long long>(c.size()) + 1) * hop, 0});
    for (int r = 1; r < sc.n; ++r) full.push_back({"CCHK-idle", omc.t_mac, 0});
  }
  const std::size_t cc_end = full.size();
  for (int r = 0; r < sc.n; ++r) full.push_back({"EIG-stamps", omc.t_mac, 0});

  Rational start = consistency_start_time(sc.n, cp);
  cp.eps_b = 3 * cp.quantum;
  for (int round = 0;; ++round) {
    if (round > 60) throw std::runtime_error("consistency check start does not settle; reduce the quantum");
    if (!cycles.empty()) full[cc_first].not_before = cp.a_max * start;
    plan = stage_plan(0, full, cp);
    const Rational sigma_max = plan.bounds[cc_end];
    cp.eps_b = err * sigma_max + 3 * cp.quantum;
    Rational need = consistency_start_time(sc.n, cp);
    for (std::size_t c = 0; c < cycles.size(); ++c)
      need = std::max(need, cycle_start_bound(a_hat[c], static_cast<int>(cycles[c].size()), cp));
    if (need <= start) break;
    start = need * Rational(9, 8);
  }
  m.start = start;
  m.eps_b = cp.eps_b;
}

std::vector<StampReport> Engine::Impl::circulate(std::size_t ci, const Cycle& cycle, std::size_t stage) {
  const NetworkView& v = views.at(*good.begin());
  const std::size_t mlen = cycle.size();
  const std::size_t L = kLaps * mlen + 1;
  auto who = [&](std::size_t p) { return cycle[p % mlen]; };
  auto hop_map = [&](std::size_t p) { return v.topology.map(who(p), who(p + 1)); };
  std::vector<std::optional<Rational>> rec(L), snt(L);
  const Rational& q = cp.quantum;

  const NodeId leader = who(0);
  const Time t0 = clock(leader).when(ceil_q(plan.bounds[stage], q));
  const bool fabricate = adv->fabricates_stamps();

  // honest forwarding from position p, whose node received at time t
  auto forward = [&](std::size_t p, const Time& t) -> Time {
    const NodeId u = who(p);
    const Time out = clock(u).when(ceil_q(clock(u).exact(t + sc.packet), q));
    snt[p] = is_bad(u) ? adv->presented_reading(u, who(p + 1), out) : clock(u).read(out, q);
    return out;
  };
  auto receive = [&](std::size_t p, const Time& t) {
    const NodeId u = who(p);
    rec[p] = is_bad(u) ? adv->presented_reading(u, who(p - 1), t) : clock(u).read(t, q);
  };

  std::vector<std::size_t> good_pos;
  for (std::size_t p = 0; p < L; ++p)
    if (!is_bad(who(p))) good_pos.push_back(p);

  if (!fabricate || good_pos.empty()) {
    Time t = clock(leader).when(ceil_q(clock(leader).exact(t0), q));
    snt[0] = is_bad(leader) ? adv->presented_reading(leader, who(1), t) : clock(leader).read(t, q);
    for (std::size_t p = 1; p < L; ++p) {
      receive(p, t);
      if (p + 1 < L) t = forward(p, t);
    }
  } else {
    // bad run before the first good position: stamps traced back from
    // what the good node actually read, with zero holds
    std::size_t p = good_pos.front();
    Time t = t0 + sc.packet * static_cast<long long>(p);
    if (p > 0) {
      rec[p] = clock(who(p)).read(t, q);
      Rational y = *rec[p];
      for (std::size_t b = p; b-- > 0;) {
        const DeclaredMap mp = hop_map(b);
        snt[b] = (y - mp.offset) / mp.skew;
        if (b > 0) rec[b] = snt[b];
        y = *snt[b];
      }
    } else {
      snt[0] = ceil_q(clock(leader).exact(t0), q);
      t = clock(leader).when(*snt[0]);
    }
    if (p > 0 && p + 1 < L) t = forward(p, t);
    for (std::size_t gi = 0; gi < good_pos.size(); ++gi) {
      p = good_pos[gi];
      if (p + 1 >= L) break;
      if (gi + 1 < good_pos.size()) {
        const std::size_t g2 = good_pos[gi + 1];
        if (g2 == p + 1) {
          receive(g2, t);
        } else {
          std::vector<DeclaredMap> chain;
          for (std::size_t h = p; h < g2; ++h) chain.push_back(hop_map(h));
          const Time earliest = t + sc.packet * static_cast<long long>(g2 - p - 1);
          const Rational floor_read = clock(who(g2)).read(earliest, q);
          auto seg = delay_minimizing_clocks(chain, DeclaredMap{0, floor_read}, *snt[p], cp.k_delay);
          for (std::size_t k = 1; k < chain.size(); ++k) {
            rec[p + k] = seg.received[k];
            snt[p + k] = seg.sent[k];
          }
          const Time arrive = std::max(earliest, clock(who(g2)).when(ceil_q(seg.end_received, q)));
          receive(g2, arrive);
          t = arrive;
        }
        if (g2 + 1 < L) t = forward(g2, t);
      } else {
        // trailing bad run: nobody good reads it any more
        for (std::size_t b = p + 1; b < L; ++b) {
          rec[b] = hop_map(b - 1).apply(*snt[b - 1]);
          if (b + 1 < L) snt[b] = rec[b];
        }
      }
    }
  }

  std::vector<StampReport> out;
  for (std::size_t p = 0; p < L; ++p) {
    out.push_back({ci, p, who(p), rec[p], snt[p]});
    if (!is_bad(who(p)) && rec[p] && plan.stage_of(*rec[p]) != stage) ++m.cross_stage;
  }
  return out;
}

void Engine::Impl::consistency_check() {
  settle_check_start();
  const std::size_t cc_first = specs.size();
  std::map<NodeId, std::vector<Item>> roots;
  for (std::size_t ci = 0; ci < cycles.size(); ++ci) {
    const std::size_t stage = cc_first + ci * sc.n;
    for (const auto& r : circulate(ci, cycles[ci], stage)) {
      Item it{r.key(), {node(r.node).sign(r.body())}};
      roots[r.node].push_back(it);
      std::string stamps = (r.received ? to_string(*r.received) : "-") + "/" + (r.sent ? to_string(*r.sent) : "-");
      log(clock(r.node).when(plan.bounds[stage]), r.node, Phase::ConsistencyCheck, "CCHK",
          "cycle " + std::to_string(ci) + " pos " + std::to_string(r.position) + " " + stamps);
    }
  }
  if (!cycles.empty()) {
    const std::size_t first = cc_first + cycles.size() * sc.n;
    auto when = [&](NodeId u, std::size_t r) { return clock(u).when(plan.send_time(first + r - 1)); };
    auto check = [](const Item& it) {
      if (it.parts.size() != 1) return false;
      auto r = StampReport::parse(it.parts[0].body);
      return r && r->key() == it.key && r->node == it.parts[0].signer;
    };
    auto decided = agreement(Phase::ConsistencyCheck, roots, check, when);
    m.views_agree = m.views_agree && same_decisions(decided);
    std::set<NodePair> failed_first;
    for (const auto& [g, items] : decided) {
      std::set<NodePair> failed;
      for (std::size_t ci = 0; ci < cycles.size(); ++ci) {
        CycleTrace tr = CycleTrace::empty(cycles[ci], kLaps);
        for (std::size_t p = 0; p < tr.hops.size(); ++p) {
          auto it = items.find(StampReport{ci, p, 0, {}, {}}.key());
          if (it == items.end()) continue;
          auto r = StampReport::parse(it->second.parts[0].body);
          if (!r || r->node != tr.hops[p].node) continue;
          tr.hops[p].received = r->received;
          tr.hops[p].sent = r->sent;
        }
        auto verdict = run_cycle_check(tr, views.at(g).topology, cp);
        failed.insert(verdict.failed_links.begin(), verdict.failed_links.end());
      }
      for (const auto& link : failed) views.at(g).remove_link(link);
      if (g == *good.begin()) failed_first = failed;
    }
    m.removed_by_check.assign(failed_first.begin(), failed_first.end());
  }
  for (NodeId i = 1; i <= sc.n; ++i) node(i).restrict_neighbors(views.at(*good.begin()));
  for (const auto& [link, cert] : views.at(*good.begin()).certificates) m.links_final.push_back(link);
  m.stages = plan.stages();
  m.discovery_end = plan.bounds.back();
}

void Engine::Impl::steady_state() {
  const NetworkView& v0 = views.at(*good.begin());
  const int n = sc.n;
  const Rational a = cp.a_max;
  const Rational t_ss = a * plan.bounds.back() + a * a * cp.u0;
  m.steady_start = to_double(t_ss);
  if (!sc.params) {
    params = select_parameters(n, to_double(a), to_double(cp.u0), static_cast<int>(sc.model.size()), sc.eps, overhead,
                               1e300, m.steady_start);
    params.eps_a = to_double(cp.eps_a);
  }
  m.params = params;

  FeasibleSet feasible = initial_feasible_set(v0);
  if (feasible.entries.empty()) throw AssumptionCViolated("no link certificates survived discovery");
  m.feasible_initial = feasible.ctvs();

  const std::size_t slots = slot_count(n);
  const Rational dead = to_rational(params.dead_time);
  const Rational b_slot = to_rational(params.data_time) / static_cast<long long>(slots);
  const double t_iter = params.iteration_time(overhead);
  const Rational t_iter_r = to_rational(t_iter);
  const double b_slot_d = to_double(b_slot);

  // reference clock: the smallest id of the first good node's component
  std::map<NodeId, OperatingPoint> ops;
  auto replan = [&]() {
    std::set<std::string> prints;
    ops.clear();
    for (NodeId g : good) {
      ops[g] = plan_iteration(feasible, sc.model, sc.utility, g, n, b_slot, dead);
      prints.insert(ops[g].fingerprint);
    }
    if (prints.size() > 1) m.schedules_agree = false;
  };
  replan();
  const OperatingPoint* op = &ops.at(*good.begin());
  NodeSet comp = op->component;
  const NodeId ref = *comp.begin();
  std::map<NodeId, Rational> a_hat = reference_clock(v0.topology, comp);

  const int total_iters = params.n_iter;
  const int simulated = opt.max_iterations ? std::min(total_iters, *opt.max_iterations) : total_iters;
  Matrix<double> delivered_total = Matrix<double>::Zero(n, n);
  Matrix<double> last_delivered = Matrix<double>::Zero(n, n);
  double utility_sum = 0;
  bool last_clean = true;

  for (int k = 1; k <= simulated; ++k) {
    const Schedule& sched = op->schedule;
    const Rational base = t_ss + t_iter_r * (k - 1);
    const bool timed = k == 1 || k == simulated;

    // bad nodes decide every slot up front so a rush can reach back
    std::vector<std::map<NodeId, SlotAction>> acts(sched.slots.size());
    for (std::size_t j = 0; j < sched.slots.size(); ++j)
      for (NodeId b : sc.bad) {
        SlotAction act = adv->slot_action(b, k, j, sched.slots[j]);
        if (act == SlotAction::Rush && !sched.slots[j].tx.contains(b)) act = SlotAction::Conform;
        acts[j][b] = act;
      }

    std::map<NodePair, Matrix<double>> bits;
    std::map<NodeId, std::vector<FailureRecord>> reports;
    for (std::size_t j = 0; j < sched.slots.size(); ++j) {
      const Slot& s = sched.slots[j];
      if (!s.ctv) continue;
      NodeSet jamming, transmitting = s.tx;
      for (const auto& [b, act] : acts[j]) {
        if (act == SlotAction::Jam) jamming.insert(b);
        if (act == SlotAction::Silent || act == SlotAction::Rush) transmitting.erase(b);
      }
      if (j + 1 < sched.slots.size())
        for (const auto& [b, act] : acts[j + 1])
          if (act == SlotAction::Rush) jamming.insert(b);
      const RateMatrix& claimed = feasible.entries.at(*s.entry).claimed;
      const auto outcome = resolve_channel(sc.model, *s.ctv, jamming, transmitting, claimed);

      std::set<std::pair<NodeId, NodeId>> ok(
          [&] {
            std::set<std::pair<NodeId, NodeId>> x;
            for (const auto& tr : outcome.delivered) x.insert({tr.from, tr.to});
            return x;
          }());
      for (const auto& sh : s.manifest) {
        if (!ok.contains({sh.from, sh.to})) continue;
        auto& b = bits.try_emplace(sh.commodity, Matrix<double>::Zero(n, n)).first->second;
        b(sh.from - 1, sh.to - 1) += rate(claimed, sh.from, sh.to) * sh.fraction * b_slot_d;
      }
      NodeSet complained;
      for (const auto& tr : outcome.lost)
        if (s.rx.contains(tr.to) && complained.insert(tr.to).second)
          reports[tr.to].push_back({k, j, *s.ctv, tr.to});

      if (timed) {
        const Rational slot_begin = base + sched.slot_start(j);
        const AffineClock& rc = clock(ref);
        for (NodeId i : transmitting) {
          if (!a_hat.contains(i)) continue;
          const Time ts = clock(i).when((slot_begin + dead) / a_hat.at(i));
          const Time te = clock(i).when((slot_begin + dead + b_slot) / a_hat.at(i));
          const bool inside = rc.exact(ts) >= slot_begin && rc.exact(te) <= slot_begin + sched.slot_length();
          if (!inside) ++m.timing_violations;
          log(ts, i, Phase::DataTransfer, "DATA", (inside ? "slot " : "outside slot ") + std::to_string(j));
        }
        for (const auto& tr : outcome.lost)
          log(base + sched.slot_start(j), tr.to, Phase::DataTransfer, "DATA",
              "lost " + std::to_string(tr.from) + "->" + std::to_string(tr.to) + " slot " + std::to_string(j));
      }
    }

    Matrix<double> x = Matrix<double>::Zero(n, n);
    Matrix<double> delivered = Matrix<double>::Zero(n, n);
    for (const auto& [c, b] : bits) {
      const double got = max_flow(b, c.first, c.second);
      delivered(c.first - 1, c.second - 1) += got;
    }
    delivered_total += delivered;
    last_delivered = delivered;
    x = delivered / t_iter;
    const double u_k = evaluate_utility(sc.utility, x, comp);
    utility_sum += u_k;
    m.utility_final_iteration = u_k;

    // verification: signed failure records agreed on by everyone
    std::map<NodeId, std::vector<Item>> roots;
    std::vector<FailureRecord> bad_honest;
    for (const auto& [who, recs] : reports)
      for (const auto& r : recs) {
        if (is_bad(who)) {
          bad_honest.push_back(r);
          continue;
        }
        roots[who].push_back({r.key(), {node(who).sign(r.body())}});
      }
    if (!sc.bad.empty())
      for (const auto& r : adv->failure_reports(k, sched, bad_honest)) {
        if (!is_bad(r.reporter)) continue;  // cannot sign for a good node
        roots[r.reporter].push_back({r.key(), {node(r.reporter).sign(r.body())}});
      }
    std::size_t filed = 0;
    for (const auto& [who, items] : roots) filed += items.size();
    m.failure_records += filed;

    const Time verify_at = base + sched.frame_length();
    std::vector<std::size_t> failed;
    if (filed == 0) {
      log(verify_at, *good.begin(), Phase::Verification, "VRFY", "iteration " + std::to_string(k) + " clean");
    } else {
      auto when = [&](NodeId, std::size_t r) { return verify_at + 2 * dead * static_cast<long long>(slot_count(n) * (r - 1)); };
      auto check = [](const Item& it) {
        return it.parts.size() == 1 && it.key.rfind("fail:", 0) == 0 &&
               FailureRecord::parse(it.parts[0].body).has_value();
      };
      auto decided = agreement(Phase::Verification, roots, check, when);
      std::set<std::vector<std::size_t>> verdicts;
      for (const auto& [g, items] : decided) verdicts.insert(failed_entries(items, sched, k, reg));
      if (verdicts.size() > 1) m.views_agree = false;
      failed = failed_entries(decided.at(*good.begin()), sched, k, reg);
    }
    last_clean = failed.empty();
    if (!failed.empty()) {
      feasible = prune(feasible, failed);
      m.prune_history.push_back({k, failed, feasible.entries.size()});
      std::string list;
      for (auto f : failed) list += std::to_string(f) + " ";
      log(verify_at, *good.begin(), Phase::Verification, "VRFY", "prune " + list);
      if (feasible.entries.empty()) throw AssumptionCViolated("every CTV was pruned");
      replan();
      op = &ops.at(*good.begin());
      comp = op->component;
    }
  }

  // iterations beyond the cap repeat the last one when it was clean
  if (simulated < total_iters && last_clean) {
    const int rest = total_iters - simulated;
    delivered_total += last_delivered * static_cast<double>(rest);
    utility_sum += m.utility_final_iteration * rest;
  }

  const double lifetime = to_double(t_ss) + total_iters * t_iter;
  m.lifetime = lifetime;
  m.throughput = delivered_total / lifetime;
  m.utility_long_run = evaluate_utility(sc.utility, m.throughput, comp);
  m.utility_steady = utility_sum / total_iters;
  m.lp_final = op->optimum.value;
  m.overhead_fraction = 1 - total_iters * params.data_time / lifetime;
  m.component = comp;
  m.feasible_final = feasible.ctvs();
}

RunResult Engine::Impl::run() {
  setup();
  for (std::size_t k = 0; k < std::size(kDiscoveryStages); ++k) discovery_stage(k, kDiscoveryStages[k]);
  for (NodeId i = 1; i <= sc.n; ++i) m.neighbors[i] = node(i).neighbors();
  if (!opt.neighbor_discovery_only) {
    network_discovery();
    consistency_check();
    steady_state();
  }
  return {std::move(m), std::move(trace)};
}

Engine::Engine(Scenario scenario, std::unique_ptr<AdversaryStrategy> adversary, EngineOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->sc = std::move(scenario);
  impl_->opt = options;
  impl_->adv = adversary ? std::move(adversary) : make_strategy(impl_->sc.adversary, impl_->sc.strategy);
}

Engine::~Engine() = default;

RunResult Engine::run() { return impl_->run(); }

RunResult run_scenario(const Scenario& scenario, EngineOptions options) {
  Engine e(scenario, nullptr, options);
  return e.run();
}

}  // namespace adhoc
