#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "adhoc/model.hpp"

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

std::vector<Position> example_one_positions() { return {{0, 0}, {1, 0}, {10, 0}}; }

GeometricRadio example_radio() {
  GeometricRadio r;
  r.lambda = {1.0, 2.0};
  r.sinr_threshold = {2.0, 8.0};
  r.noise = 1e-4;
  r.path_loss = 2.0;
  r.max_transmitters = 2;
  return r;
}

}  // namespace

TEST_CASE("rational helpers") {
  CHECK(parse_rational("3/4") == Rational(3, 4));
  CHECK(parse_rational("1.25") == Rational(5, 4));
  CHECK(parse_rational("-2") == Rational(-2));
  CHECK_THROWS_AS(parse_rational("x"), std::invalid_argument);
  CHECK(to_string(Rational(3, 4)) == "3/4");
  CHECK(quantize_down(Rational(7, 2), Rational(1)) == 3);
  CHECK(quantize_down(Rational(-1, 2), Rational(1)) == -1);
  CHECK(to_rational(0.375) == Rational(3, 8));
}

TEST_CASE("clock params validation names the field") {
  ClockParams p;
  p.a_max = Rational(1, 2);
  try {
    p.validate();
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("a_max") != std::string::npos);
  }
}

TEST_CASE("ctv text round trip") {
  Ctv c = parse_ctv("T2@1.5,L,J", 3);
  CHECK(c[0] == Mode::transmit(2, 1.5));
  CHECK(describe(c) == "T2@1.5,L,J");
  CHECK_THROWS(parse_ctv("T1@1,L", 2));
  CHECK_THROWS(parse_ctv("L,L", 3));
}

TEST_CASE("enabled graph") {
  SUBCASE("single edge") {
    RateModel m;
    m.n = 2;
    m.entries.push_back(entry_with(2, {{1, 2, 1.0}}));
    Digraph g = enabled_graph(m, all_entries(m));
    CHECK(g.has(1, 2));
    CHECK_FALSE(g.has(2, 1));
  }
  SUBCASE("symmetric clique") {
    RateModel m;
    m.n = 3;
    for (int i = 1; i <= 3; ++i)
      for (int j = 1; j <= 3; ++j)
        if (i != j) m.entries.push_back(entry_with(3, {{i, j, 1.0}}));
    Digraph g = enabled_graph(m, all_entries(m));
    for (int i = 1; i <= 3; ++i)
      for (int j = 1; j <= 3; ++j) CHECK(g.has(i, j) == (i != j));
  }
  SUBCASE("no out-edges once a transmitter's entries are disabled") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> node(1, 4);
    RateModel m;
    m.n = 4;
    for (int k = 0; k < 40; ++k) {
      int i = node(rng), j = node(rng);
      if (i == j) continue;
      m.entries.push_back(entry_with(4, {{i, j, 1.0}}));
    }
    EnabledSet enabled;
    for (std::size_t e = 0; e < m.size(); ++e)
      if (m.entries[e].modes[3].kind != ModeKind::Transmit) enabled.push_back(e);
    Digraph g = enabled_graph(m, enabled);
    for (int j = 1; j <= 3; ++j) CHECK_FALSE(g.has(4, j));
  }
}

TEST_CASE("good component") {
  Digraph full(4);
  for (int i = 1; i <= 4; ++i)
    for (int j = 1; j <= 4; ++j)
      if (i != j) full.add(i, j);
  CHECK(good_component(full, {1, 2}) == NodeSet{1, 2, 3, 4});

  Digraph line(3);
  line.add(1, 2);
  line.add(2, 1);
  line.add(2, 3);
  CHECK(good_component(line, {1, 2}) == NodeSet{1, 2});

  Digraph split(3);
  split.add(1, 2);
  CHECK_THROWS_AS(good_component(split, {1, 2}), AssumptionCViolated);
}

TEST_CASE("example-one component after disabling node 3's links") {
  const NodeSet bad{3};
  RateModel m = geometric_model(example_one_positions(), example_radio(), bad);
  EnabledSet enabled;
  for (std::size_t e = 0; e < m.size(); ++e) {
    const auto& r = m.entries[e].rates;
    bool touches3 = false;
    for (int k = 1; k <= 2; ++k) touches3 |= rate(r, 3, k) > 0 || rate(r, k, 3) > 0;
    if (!touches3) enabled.push_back(e);
  }
  CHECK(good_component(enabled_graph(m, enabled), {1, 2}) == NodeSet{1, 2});
  CHECK(good_component(enabled_graph(m, all_entries(m)), {1, 2}) == NodeSet{1, 2, 3});
}

TEST_CASE("utility evaluation") {
  Matrix<double> x = Matrix<double>::Zero(3, 3);
  x(0, 1) = 5;
  x(2, 1) = 2;
  UtilitySpec fair;
  fair.family = UtilityFamily::MinFairness;
  fair.weights = {{{1, 2}, 1.0}, {{3, 2}, 1.0}};
  CHECK(evaluate_utility(fair, x) == doctest::Approx(2));

  UtilitySpec zero;
  zero.weights = {{{1, 2}, 0.0}, {{3, 2}, 0.0}};
  CHECK(evaluate_utility(zero, x) == 0);

  Matrix<double> y = Matrix<double>::Zero(2, 2);
  y(0, 1) = 3;
  y(1, 0) = 4;
  UtilitySpec sum;
  sum.weights = {{{1, 2}, 1.0}, {{2, 1}, 1.0}};
  CHECK(evaluate_utility(sum, y) == doctest::Approx(7));

  // restricting the scope drops pairs touching excluded nodes
  CHECK(evaluate_utility(fair, x, NodeSet{1, 2}) == doctest::Approx(5));
}

TEST_CASE("utility is monotone in every component") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0, 5);
  UtilitySpec fair{UtilityFamily::MinFairness, {{{1, 2}, 1.0}, {{2, 3}, 1.0}, {{3, 1}, 1.0}}, {}};
  UtilitySpec sum{UtilityFamily::WeightedSum, {{{1, 2}, 0.5}, {{2, 3}, 2.0}, {{3, 1}, 1.0}}, {}};
  for (int trial = 0; trial < 200; ++trial) {
    Matrix<double> x(3, 3);
    for (int i = 0; i < 9; ++i) x(i) = u(rng);
    Matrix<double> y = x;
    y(trial % 9) += u(rng);
    CHECK(evaluate_utility(fair, y) >= evaluate_utility(fair, x));
    CHECK(evaluate_utility(sum, y) >= evaluate_utility(sum, x));
  }
}

TEST_CASE("geometric model properties") {
  const NodeSet bad{3};
  RateModel m = geometric_model(example_one_positions(), example_radio(), bad);
  CHECK(m.size() > 4);
  CHECK(half_duplex_ok(m, bad));
  CHECK(downward_closed(m));
  CHECK(m.silent_entry().has_value());
  for (const auto& e : m.entries) {
    for (int i = 1; i <= 3; ++i)
      for (int j = 1; j <= 3; ++j) {
        double r = rate(e.rates, i, j);
        CHECK((r == 0 || r == 1.0 || r == 2.0));
        CHECK(rate(e.jammed, i, j) <= r);
      }
  }
  // the far bad node can always spoil its own links by jamming
  CHECK_FALSE(jammable_entries(m, bad).empty());
  CHECK(jammable_entries(m, {}).empty());
}

TEST_CASE("clock bound check") {
  ClockParams p;
  p.a_max = 2;
  p.u0 = 3;
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> skew(100, 200), on(0, 300);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<AffineClock> clocks;
    clocks.push_back({1, 0});
    for (int k = 0; k < 3; ++k) {
      Rational a(skew(rng), 100);
      Rational t_on(on(rng), 100);
      clocks.push_back({a, -a * t_on});
    }
    CHECK(clocks_within_bounds(clocks, {1, 2, 3, 4}, p));
  }
}
