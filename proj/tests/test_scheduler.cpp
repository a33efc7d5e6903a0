#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "adhoc/scheduler.hpp"

#include <queue>
#include <random>

using namespace adhoc;

namespace {

CtvEntry entry_with(int n, std::initializer_list<std::tuple<int, int, double>> links, const NodeSet& bad = {}) {
  CtvEntry e;
  e.modes = Ctv(n);
  e.rates = zero_rates(n);
  for (auto [i, j, r] : links) {
    rate(e.rates, i, j) = r;
    e.modes[i - 1] = Mode::transmit(j, r);
    e.modes[j - 1] = Mode::listen();
  }
  e.jammed = default_jammed(e.rates, bad);
  e.label = describe(e.modes);
  return e;
}

NodeSet everyone(int n) {
  NodeSet s;
  for (int i = 1; i <= n; ++i) s.insert(i);
  return s;
}

// Edmonds-Karp on a dense capacity matrix, nodes 0..n-1
double max_flow(Matrix<double> cap, int s, int t) {
  const int n = static_cast<int>(cap.rows());
  double total = 0;
  for (;;) {
    std::vector<int> prev(n, -1);
    prev[s] = s;
    std::queue<int> q;
    q.push(s);
    while (!q.empty() && prev[t] < 0) {
      int u = q.front();
      q.pop();
      for (int v = 0; v < n; ++v)
        if (prev[v] < 0 && cap(u, v) > 1e-12) {
          prev[v] = u;
          q.push(v);
        }
    }
    if (prev[t] < 0) return total;
    double push = 1e300;
    for (int v = t; v != s; v = prev[v]) push = std::min(push, cap(prev[v], v));
    for (int v = t; v != s; v = prev[v]) {
      cap(prev[v], v) -= push;
      cap(v, prev[v]) += push;
    }
    total += push;
  }
}

RateModel random_model(std::mt19937& rng, int n, int entries, int links_per_entry) {
  std::uniform_int_distribution<int> node(1, n);
  std::uniform_int_distribution<int> r(1, 8);
  RateModel m;
  m.n = n;
  m.lambda = {1, 2, 3, 4, 5, 6, 7, 8};
  while (static_cast<int>(m.entries.size()) < entries) {
    CtvEntry e;
    e.modes = Ctv(n);
    e.rates = zero_rates(n);
    NodeSet used;
    for (int k = 0; k < links_per_entry; ++k) {
      int i = node(rng), j = node(rng);
      if (i == j || used.contains(i) || used.contains(j)) continue;
      used.insert(i);
      used.insert(j);
      rate(e.rates, i, j) = r(rng);
      e.modes[i - 1] = Mode::transmit(j, rate(e.rates, i, j));
      e.modes[j - 1] = Mode::listen();
    }
    e.jammed = e.rates;
    e.label = describe(e.modes);
    m.entries.push_back(e);
  }
  return m;
}

std::vector<std::size_t> all_ctvs(const RateModel& m) {
  std::vector<std::size_t> v(m.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

// Far-away bad node: link 32 is barely decodable, node 3's jamming barely
// dents link 12.
GeometricRadio far_node_radio() {
  GeometricRadio r;
  r.lambda = {1.0, 8.0};
  r.sinr_threshold = {2.0, 1000.0};
  r.noise = 1e-4;
  r.path_loss = 2.0;
  r.max_transmitters = 2;
  return r;
}
std::vector<Position> far_node_positions() { return {{0, 0}, {1, 0}, {71, 0}}; }

UtilitySpec fair_12_32() {
  UtilitySpec u;
  u.family = UtilityFamily::MinFairness;
  u.weights = {{{1, 2}, 1.0}, {{3, 2}, 1.0}};
  return u;
}

}  // namespace

TEST_CASE("simplex on textbook programs") {
  LinearProgram<Rational> lp;
  lp.a = Matrix<Rational>(3, 2);
  lp.a << 1, 0, 0, 2, 3, 2;
  lp.b = Vector<Rational>(3);
  lp.b << 4, 12, 18;
  lp.c = Vector<Rational>(2);
  lp.c << 3, 5;
  auto s = solve_lp(lp);
  CHECK(s.objective == 36);
  CHECK(s.x(0) == 2);
  CHECK(s.x(1) == 6);

  // Beale's program cycles under the largest-coefficient rule
  LinearProgram<Rational> beale;
  beale.a = Matrix<Rational>(3, 4);
  beale.a << Rational(1, 4), -8, -1, 9, Rational(1, 2), -12, Rational(-1, 2), 3, 0, 0, 1, 0;
  beale.b = Vector<Rational>(3);
  beale.b << 0, 0, 1;
  beale.c = Vector<Rational>(4);
  beale.c << Rational(3, 4), -20, Rational(1, 2), -6;
  CHECK(solve_lp(beale).objective == Rational(5, 4));

  LinearProgram<double> unbounded;
  unbounded.a = Matrix<double>(1, 2);
  unbounded.a << 1, -1;
  unbounded.b = Vector<double>::Constant(1, 1);
  unbounded.c = Vector<double>::Constant(2, 1);
  CHECK_THROWS(solve_lp(unbounded));
}

TEST_CASE("single link at rate 10") {
  RateModel m;
  m.n = 2;
  m.entries = {entry_with(2, {{1, 2, 10}})};
  UtilitySpec u;
  u.weights = {{{1, 2}, 1.0}};
  auto opt = max_utility_lp(true_feasible_set(m, {0}), u, {1, 2}, 2);
  CHECK(opt.x(0, 1) == doctest::Approx(10));
  CHECK(opt.alpha[0] == doctest::Approx(1));
  CHECK(opt.value == doctest::Approx(10));
}

TEST_CASE("relay path through a middle node") {
  RateModel m;
  m.n = 3;
  m.entries = {entry_with(3, {{1, 2, 6}}), entry_with(3, {{2, 3, 3}})};
  UtilitySpec u;
  u.weights = {{{1, 3}, 1.0}};
  // t/6 + t/3 <= 1
  CHECK(max_utility_value_exact(true_feasible_set(m, {0, 1}), u, everyone(3), 3) == 2);
  auto opt = max_utility_lp(true_feasible_set(m, {0, 1}), u, everyone(3), 3);
  CHECK(opt.flows.at({1, 3})(0, 1) == doctest::Approx(2));
  CHECK(opt.flows.at({1, 3})(1, 2) == doctest::Approx(2));
}

TEST_CASE("far bad node: conforming costs the fair utility more than jamming") {
  const NodeSet bad{3};
  RateModel m = geometric_model(far_node_positions(), far_node_radio(), bad);
  const auto u = fair_12_32();
  const NodeSet all3 = good_component(enabled_graph(m, all_entries(m)), {1, 2});
  REQUIRE(all3 == everyone(3));
  // x12 = x32 = t with t/8 + t/1 <= 1
  CHECK(max_utility_value_exact(true_feasible_set(m, all_entries(m)), u, all3, 3) == Rational(8, 9));

  EnabledSet no3;
  for (std::size_t e = 0; e < m.size(); ++e) {
    const auto& r = m.entries[e].rates;
    if (rate(r, 3, 2) == 0 && rate(r, 2, 3) == 0 && rate(r, 1, 3) == 0 && rate(r, 3, 1) == 0) no3.push_back(e);
  }
  const NodeSet comp = good_component(enabled_graph(m, no3), {1, 2});
  CHECK(comp == NodeSet{1, 2});
  CHECK(max_utility_value_exact(true_feasible_set(m, no3), u, comp, 3) == 8);
}

TEST_CASE("LP matches an alpha-grid search with max-flow inner solve") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    RateModel m = random_model(rng, 4, 3, 2);
    UtilitySpec u;
    u.weights = {{{1, 4}, 1.0}};
    const auto fs = true_feasible_set(m, all_ctvs(m));
    const double lp = max_utility_lp(fs, u, everyone(4), 4).value;
    double grid = 0;
    for (int a0 = 0; a0 <= 64; ++a0)
      for (int a1 = 0; a0 + a1 <= 64; ++a1) {
        const int a2 = 64 - a0 - a1;
        Matrix<double> cap = (a0 * m.entries[0].rates + a1 * m.entries[1].rates + a2 * m.entries[2].rates) / 64.0;
        grid = std::max(grid, max_flow(cap, 0, 3));
      }
    CHECK(lp >= grid - 1e-9);
    // moving to the grid costs at most 1/64 of each entry's rates on every cut link
    double rmax = 0;
    for (const auto& e : m.entries) rmax = std::max(rmax, e.rates.maxCoeff());
    CHECK(lp - grid <= 3 * 3 * rmax / 64 + 1e-9);
  }
}

TEST_CASE("two commodities against a grid of alpha and per-link splits") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    RateModel m = random_model(rng, 3, 3, 1);
    UtilitySpec u;
    u.weights = {{{1, 3}, 1.0}, {{2, 3}, 0.5}};
    const auto fs = true_feasible_set(m, all_ctvs(m));
    const double lp = max_utility_lp(fs, u, everyone(3), 3).value;
    double grid = 0;
    const int steps = 16;
    for (int a0 = 0; a0 <= steps; ++a0)
      for (int a1 = 0; a0 + a1 <= steps; ++a1) {
        const int a2 = steps - a0 - a1;
        Matrix<double> cap =
            (a0 * m.entries[0].rates + a1 * m.entries[1].rates + a2 * m.entries[2].rates) / double(steps);
        // each of the 6 links splits its capacity {0, 1/2, 1} to commodity one
        for (int code = 0; code < 729; ++code) {
          Matrix<double> c1 = Matrix<double>::Zero(3, 3), c2 = Matrix<double>::Zero(3, 3);
          int k = code;
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
              if (i == j) continue;
              double share = (k % 3) / 2.0;
              k /= 3;
              c1(i, j) = share * cap(i, j);
              c2(i, j) = (1 - share) * cap(i, j);
            }
          grid = std::max(grid, max_flow(c1, 0, 2) + 0.5 * max_flow(c2, 1, 2));
        }
      }
    CHECK(lp >= grid - 1e-9);
  }
}

TEST_CASE("exact and floating LP agree") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    RateModel m = random_model(rng, 4, 4, 2);
    UtilitySpec u;
    u.family = trial % 2 ? UtilityFamily::MinFairness : UtilityFamily::WeightedSum;
    u.weights = {{{1, 2}, 1.0}, {{3, 4}, 2.0}, {{4, 1}, 1.0}};
    const auto fs = true_feasible_set(m, all_ctvs(m));
    const double fl = max_utility_lp(fs, u, everyone(4), 4).value;
    const Rational ex = max_utility_value_exact(fs, u, everyone(4), 4);
    CHECK(fl == doctest::Approx(to_double(ex)).epsilon(1e-9));
  }
}

TEST_CASE("discretize") {
  RateModel m;
  m.n = 3;
  m.entries = {entry_with(3, {{1, 2, 4}}), entry_with(3, {{2, 3, 2}})};
  const auto fs = true_feasible_set(m, {0, 1});
  CHECK(slot_count(3) == 18);

  UtilityOptimum point;
  point.alpha = {1.0, 0.0};
  point.x = Matrix<double>::Zero(3, 3);
  auto s = discretize(point, fs, m, 3, 1, 0);
  REQUIRE(s.slots.size() == 18);
  for (const auto& slot : s.slots) CHECK(slot.ctv == std::optional<std::size_t>(0));

  UtilityOptimum split = point;
  split.alpha = {2.0 / 3, 1.0 / 3};
  s = discretize(split, fs, m, 3, 1, 0);
  CHECK(std::count_if(s.slots.begin(), s.slots.end(), [](const Slot& x) { return x.ctv == 0u; }) == 12);
  CHECK(std::count_if(s.slots.begin(), s.slots.end(), [](const Slot& x) { return x.ctv == 1u; }) == 6);
  CHECK(s.slots.front().tx == NodeSet{1});
  CHECK(s.slots.front().rx == NodeSet{2});

  UtilitySpec u;
  u.weights = {{{1, 3}, 1.0}};
  auto opt = max_utility_lp(fs, u, everyone(3), 3);
  auto a = discretize(opt, fs, m, 3, Rational(5), Rational(1, 2));
  auto b = discretize(opt, fs, m, 3, Rational(5), Rational(1, 2));
  CHECK(a.slot_length() == 6);
  CHECK(a.slot_start(2) == 12);
  REQUIRE(a.slots.size() == b.slots.size());
  for (std::size_t k = 0; k < a.slots.size(); ++k) {
    CHECK(a.slots[k].ctv == b.slots[k].ctv);
    CHECK(a.slots[k].manifest.size() == b.slots[k].manifest.size());
  }
  bool routes13 = false;
  for (const auto& slot : a.slots)
    for (const auto& share : slot.manifest) routes13 |= share.commodity == NodePair{1, 3};
  CHECK(routes13);
}

TEST_CASE("apportionment loses at most one slot per entry") {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + trial % 6;
    std::vector<double> alpha(k);
    double sum = 0;
    for (auto& a : alpha) sum += a = u(rng);
    const double scale = u(rng);
    for (auto& a : alpha) a *= scale / sum;
    const std::size_t total = slot_count(2 + trial % 3);
    auto counts = apportion(alpha, total);
    std::size_t assigned = 0;
    for (auto c : counts) assigned += c;
    CHECK(assigned == total);
    for (std::size_t e = 0; e < k; ++e)
      CHECK(std::abs(double(counts[e]) / total - alpha[e]) <= 1.0 / total + 1e-12);
  }
}

TEST_CASE("prune") {
  RateModel m;
  m.n = 2;
  m.entries = {entry_with(2, {}), entry_with(2, {{1, 2, 1}}), entry_with(2, {{2, 1, 1}}), entry_with(2, {{1, 2, 2}})};
  auto c1 = true_feasible_set(m, {0, 1, 2, 3});
  CHECK(prune(c1, {}).ctvs() == c1.ctvs());
  CHECK(prune(c1, {1, 2, 3}).ctvs() == std::vector<std::size_t>{0});

  // an adversary that fails one fresh entry per iteration
  auto cur = c1;
  std::size_t steps = 0;
  while (cur.entries.size() > 1) {
    auto next = prune(cur, {cur.entries.back().ctv});
    CHECK(next.entries.size() < cur.entries.size());
    for (auto e : next.ctvs()) CHECK(cur.contains(e));
    cur = next;
    ++steps;
  }
  CHECK(steps <= c1.entries.size());
  CHECK(prune(cur, {}).ctvs() == cur.ctvs());
}

TEST_CASE("iteration count inequality") {
  const double eps_l = 1 - std::sqrt(0.5);
  CHECK(eps_l == doctest::Approx(0.2929).epsilon(1e-3));
  CHECK(12.0 / (12 + 4) >= 1 - eps_l);
  const int n_iter = minimal_iterations(2, 1, eps_l);
  CHECK(n_iter <= 12);
  CHECK(n_iter / (n_iter + 4.0) >= 1 - eps_l);
  CHECK((n_iter - 1) / (n_iter - 1 + 4.0) < 1 - eps_l);
  CHECK(n_iter == 10);
  CHECK(minimal_iterations(2, 1, 1 - std::sqrt(1 - 0.99)) == 1);
}

TEST_CASE("selected parameters satisfy every inequality") {
  for (int n : {2, 3, 4})
    for (double eps : {0.1, 0.25, 0.5, 0.9}) {
      const double a = 1.25, u0 = 10;
      const auto c = OverheadConstants::defaults(n, a, 2);
      const auto p = select_parameters(n, a, u0, 3, eps, c);
      const auto chk = check_parameters(p, n, a, u0, c);
      CHECK(chk.iterations);
      CHECK(chk.data_share);
      CHECK(chk.lifetime);
      CHECK(chk.dead_time);
      CHECK((1 - p.eps_l) * (1 - p.eps_d) >= 1 - eps - 1e-12);
    }
  const auto c = OverheadConstants::defaults(3, 1.25, 2);
  CHECK_THROWS_AS(select_parameters(3, 1.25, 10, 3, 0.25, c, 1e3), NoFeasibleParams);
  CHECK_THROWS_AS(select_parameters(3, 1.25, 10, 3, 1.0, c), std::invalid_argument);
}

TEST_CASE("min-max oracle") {
  SUBCASE("no adversary") {
    RateModel m;
    m.n = 2;
    m.entries = {entry_with(2, {{1, 2, 3}}), entry_with(2, {{2, 1, 1}})};
    UtilitySpec u;
    u.weights = {{{1, 2}, 1.0}};
    auto r = minmax_oracle(m, {1, 2}, {}, u);
    CHECK(r.per_set.size() == 1);
    CHECK(r.value == doctest::Approx(3));  // all airtime to 1->2
  }
  SUBCASE("far bad node prefers to conform") {
    const NodeSet bad{3};
    RateModel m = geometric_model(far_node_positions(), far_node_radio(), bad);
    auto r = minmax_oracle(m, {1, 2}, jammable_entries(m, bad), fair_12_32());
    CHECK(r.value == doctest::Approx(8.0 / 9));
    CHECK(r.argmin.empty());
    double best = 0;
    for (const auto& [d, v] : r.per_set) best = std::max(best, v);
    CHECK(best == doctest::Approx(8));
  }
  SUBCASE("value is below every per-set optimum") {
    std::mt19937 rng(9);
    const NodeSet bad{3};
    for (int trial = 0; trial < 5; ++trial) {
      RateModel m = random_model(rng, 3, 6, 1);
      m.entries.push_back(entry_with(3, {{1, 2, 1}}, bad));
      m.entries.push_back(entry_with(3, {{2, 1, 1}}, bad));
      for (auto& e : m.entries) e.jammed = default_jammed(e.rates, bad);
      auto jam = jammable_entries(m, bad);
      if (jam.size() > 3) jam.resize(3);
      UtilitySpec u;
      u.weights = {{{1, 2}, 1.0}, {{2, 1}, 1.0}};
      auto r = minmax_oracle(m, {1, 2}, jam, u);
      CHECK(r.per_set.size() == (std::size_t{1} << jam.size()));
      for (const auto& [d, v] : r.per_set) CHECK(r.value <= v);
    }
  }
  SUBCASE("budget") {
    RateModel m;
    m.n = 2;
    m.entries.assign(14, entry_with(2, {{1, 2, 1}}));
    std::vector<std::size_t> jam(14);
    for (std::size_t i = 0; i < 14; ++i) jam[i] = i;
    UtilitySpec u;
    u.weights = {{{1, 2}, 1.0}};
    CHECK_THROWS_AS(minmax_oracle(m, {1, 2}, jam, u, 1024), TooLarge);
  }
}
