#include "adhoc/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <sstream>

namespace adhoc {

namespace {

[[noreturn]] void fail(const std::string& field, const YAML::Node& at, const std::string& problem) {
  std::string msg = problem;
  if (at.IsDefined() && at.Mark().line >= 0) msg += " (line " + std::to_string(at.Mark().line + 1) + ")";
  throw ConfigInvalid(field, msg);
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail(field, node, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(field, node, "cannot read '" + node.Scalar() + "'");
  }
}

Rational rational(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail(field, node, "expected a number or fraction");
  try {
    return parse_rational(node.Scalar());
  } catch (const std::exception&) {
    fail(field, node, "cannot read '" + node.Scalar() + "' as a number");
  }
}

YAML::Node required(const YAML::Node& parent, const std::string& key, const std::string& field) {
  YAML::Node n = parent[key];
  if (!n.IsDefined() || n.IsNull()) fail(field, parent, "missing");
  return n;
}

NodeSet node_set(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) fail(field, node, "expected a list of node ids");
  NodeSet out;
  for (std::size_t k = 0; k < node.size(); ++k) out.insert(scalar<int>(node[k], field));
  return out;
}

RateMatrix matrix(const YAML::Node& node, int n, const std::string& field) {
  if (!node.IsSequence() || static_cast<int>(node.size()) != n) fail(field, node, "expected " + std::to_string(n) + " rows");
  RateMatrix m = zero_rates(n);
  for (int i = 0; i < n; ++i) {
    const YAML::Node row = node[i];
    if (!row.IsSequence() || static_cast<int>(row.size()) != n)
      fail(field, row, "row " + std::to_string(i + 1) + " needs " + std::to_string(n) + " entries");
    for (int j = 0; j < n; ++j) m(i, j) = scalar<double>(row[j], field);
  }
  return m;
}

// a descriptor alone implies its transmitters' rates into listening targets
RateMatrix implied_rates(const Ctv& modes, int n) {
  RateMatrix m = zero_rates(n);
  for (int i = 0; i < n; ++i) {
    const Mode& md = modes[i];
    if (md.kind == ModeKind::Transmit && md.target >= 1 && md.target <= n &&
        modes[md.target - 1].kind == ModeKind::Listen)
      m(i, md.target - 1) = md.rate;
  }
  return m;
}

RateModel rate_table(const YAML::Node& table, int n, const NodeSet& bad) {
  if (!table.IsMap() || table.size() == 0) fail("rates.table", table, "expected a map from CTV descriptor to rates");
  RateModel model;
  model.n = n;
  std::set<double> lambda;
  for (const auto& kv : table) {
    const std::string label = kv.first.as<std::string>();
    const std::string field = "rates.table[" + label + "]";
    CtvEntry e;
    e.label = label;
    try {
      e.modes = parse_ctv(label, n);
    } catch (const std::exception& ex) {
      fail(field, kv.first, ex.what());
    }
    if (static_cast<int>(e.modes.size()) != n) fail(field, kv.first, "descriptor needs one mode per node");
    const YAML::Node v = kv.second;
    if (!v.IsDefined() || v.IsNull()) {
      e.rates = implied_rates(e.modes, n);
      e.jammed = default_jammed(e.rates, bad);
    } else if (v.IsSequence()) {
      e.rates = matrix(v, n, field);
      e.jammed = default_jammed(e.rates, bad);
    } else if (v.IsMap()) {
      e.rates = v["rates"] ? matrix(v["rates"], n, field + ".rates") : implied_rates(e.modes, n);
      e.jammed = v["jammed"] ? matrix(v["jammed"], n, field + ".jammed") : default_jammed(e.rates, bad);
    } else {
      fail(field, v, "expected a matrix or {rates, jammed}");
    }
    for (int i = 0; i < n * n; ++i)
      if (e.rates(i) > 0) lambda.insert(e.rates(i));
    model.entries.push_back(std::move(e));
  }
  model.lambda.assign(lambda.begin(), lambda.end());
  return model;
}

RateModel geometric(const YAML::Node& g, int n, const NodeSet& bad) {
  const std::string f = "rates.geometric";
  const YAML::Node pos = required(g, "positions", f + ".positions");
  if (!pos.IsSequence() || static_cast<int>(pos.size()) != n) fail(f + ".positions", pos, "need one [x, y] per node");
  std::vector<Position> nodes;
  for (std::size_t k = 0; k < pos.size(); ++k) {
    if (!pos[k].IsSequence() || pos[k].size() != 2) fail(f + ".positions", pos[k], "expected [x, y]");
    nodes.push_back({scalar<double>(pos[k][0], f + ".positions"), scalar<double>(pos[k][1], f + ".positions")});
  }
  GeometricRadio r;
  const YAML::Node lam = required(g, "lambda", f + ".lambda");
  const YAML::Node thr = required(g, "sinr_threshold", f + ".sinr_threshold");
  if (!lam.IsSequence() || !thr.IsSequence() || lam.size() != thr.size() || lam.size() == 0)
    fail(f + ".sinr_threshold", thr, "needs one threshold per rate in lambda");
  for (std::size_t k = 0; k < lam.size(); ++k) {
    r.lambda.push_back(scalar<double>(lam[k], f + ".lambda"));
    r.sinr_threshold.push_back(scalar<double>(thr[k], f + ".sinr_threshold"));
  }
  if (g["power"]) r.power = scalar<double>(g["power"], f + ".power");
  if (g["noise"]) r.noise = scalar<double>(g["noise"], f + ".noise");
  if (g["path_loss"]) r.path_loss = scalar<double>(g["path_loss"], f + ".path_loss");
  if (g["max_transmitters"]) r.max_transmitters = scalar<int>(g["max_transmitters"], f + ".max_transmitters");
  return geometric_model(nodes, r, bad);
}

UtilitySpec utility(const YAML::Node& u) {
  UtilitySpec out;
  const std::string fam = u["family"] ? scalar<std::string>(u["family"], "utility.family") : "weighted-sum";
  if (fam == "weighted-sum") {
    out.family = UtilityFamily::WeightedSum;
  } else if (fam == "min-fairness") {
    out.family = UtilityFamily::MinFairness;
  } else {
    fail("utility.family", u["family"], "expected weighted-sum or min-fairness");
  }
  const YAML::Node w = required(u, "weights", "utility.weights");
  if (!w.IsMap()) fail("utility.weights", w, "expected a map like {1-2: 1.0}");
  for (const auto& kv : w) {
    const std::string key = kv.first.as<std::string>();
    const auto dash = key.find('-');
    if (dash == std::string::npos) fail("utility.weights", kv.first, "pair '" + key + "' should read i-j");
    try {
      const NodeId i = std::stoi(key.substr(0, dash)), j = std::stoi(key.substr(dash + 1));
      out.weights[{i, j}] = scalar<double>(kv.second, "utility.weights");
    } catch (const std::logic_error&) {
      fail("utility.weights", kv.first, "pair '" + key + "' should read i-j");
    }
  }
  return out;
}

ProtocolParams params(const YAML::Node& p) {
  ProtocolParams out;
  const std::string f = "params.";
  out.n_iter = scalar<int>(required(p, "n_iter", f + "n_iter"), f + "n_iter");
  out.dead_time = scalar<double>(required(p, "dead_time", f + "dead_time"), f + "dead_time");
  out.data_time = scalar<double>(required(p, "data_time", f + "data_time"), f + "data_time");
  out.eps_a = scalar<double>(required(p, "eps_a", f + "eps_a"), f + "eps_a");
  out.t_life = p["t_life"] ? scalar<double>(p["t_life"], f + "t_life") : 0.0;
  out.eps_l = p["eps_l"] ? scalar<double>(p["eps_l"], f + "eps_l") : 0.0;
  out.eps_d = p["eps_d"] ? scalar<double>(p["eps_d"], f + "eps_d") : 0.0;
  out.k_r = p["k_r"] ? scalar<int>(p["k_r"], f + "k_r") : 1;
  if (out.n_iter < 1) fail(f + "n_iter", p["n_iter"], "must be at least 1");
  if (!(out.dead_time > 0 && out.data_time > 0 && out.eps_a > 0)) fail(f + "dead_time", p, "times and eps_a must be positive");
  return out;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigInvalid("(syntax)", source + ": " + e.what());
  }
  if (!root.IsMap()) throw ConfigInvalid("(root)", source + ": expected a map of sections");

  Scenario s;
  s.name = root["name"] ? scalar<std::string>(root["name"], "name") : source;
  s.n = scalar<int>(required(root, "n", "n"), "n");
  if (s.n < 2 || s.n > 12) fail("n", root["n"], "must lie in 2..12");
  if (root["bad"]) s.bad = node_set(root["bad"], "bad");
  if (root["seed"]) s.seed = scalar<std::uint64_t>(root["seed"], "seed");
  if (root["eps"]) s.eps = scalar<double>(root["eps"], "eps");
  if (root["packet"]) s.packet = rational(root["packet"], "packet");

  const YAML::Node c = required(root, "clocks", "clocks");
  s.clock.a_max = rational(required(c, "a_max", "clocks.a_max"), "clocks.a_max");
  s.clock.u0 = rational(required(c, "u0", "clocks.u0"), "clocks.u0");
  if (c["quantum"]) s.clock.quantum = rational(c["quantum"], "clocks.quantum");
  s.clock.k_delay = c["k_delay"] ? rational(c["k_delay"], "clocks.k_delay")
                                 : std::max(2 * s.clock.a_max * s.packet, s.clock.a_max * s.packet + 2 * s.clock.quantum);
  if (c["explicit"]) {
    const YAML::Node ex = c["explicit"];
    if (!ex.IsSequence()) fail("clocks.explicit", ex, "expected a list of [skew, offset]");
    for (std::size_t k = 0; k < ex.size(); ++k) {
      if (!ex[k].IsSequence() || ex[k].size() != 2) fail("clocks.explicit", ex[k], "expected [skew, offset]");
      s.clocks.push_back({rational(ex[k][0], "clocks.explicit"), rational(ex[k][1], "clocks.explicit")});
    }
  } else {
    const std::uint64_t clock_seed = c["seed"] ? scalar<std::uint64_t>(c["seed"], "clocks.seed") : s.seed;
    const int steps = c["steps"] ? scalar<int>(c["steps"], "clocks.steps") : 64;
    if (steps < 1) fail("clocks.steps", c["steps"], "must be positive");
    try {
      s.clock.validate();
    } catch (const std::invalid_argument& e) {
      fail("clocks", c, e.what());
    }
    s.clocks = seeded_clocks(s.n, s.clock, clock_seed, steps);
  }

  const YAML::Node r = required(root, "rates", "rates");
  if (r["table"] && r["geometric"]) fail("rates", r, "give either table or geometric, not both");
  if (r["table"]) {
    s.model = rate_table(r["table"], s.n, s.bad);
  } else if (r["geometric"]) {
    s.model = geometric(r["geometric"], s.n, s.bad);
  } else {
    fail("rates", r, "needs a table or a geometric section");
  }

  s.utility = utility(required(root, "utility", "utility"));

  if (const YAML::Node a = root["adversary"]) {
    s.adversary = scalar<std::string>(required(a, "strategy", "adversary.strategy"), "adversary.strategy");
    StrategySettings& st = s.strategy;
    if (a["disable"]) {
      if (!a["disable"].IsSequence()) fail("adversary.disable", a["disable"], "expected a list of CTV indices");
      for (std::size_t k = 0; k < a["disable"].size(); ++k)
        st.disable.push_back(scalar<std::size_t>(a["disable"][k], "adversary.disable"));
    }
    if (a["delta"]) st.delta = rational(a["delta"], "adversary.delta");
    if (a["fraction"]) st.fraction = scalar<double>(a["fraction"], "adversary.fraction");
    if (a["target"]) {
      if (!a["target"].IsMap()) fail("adversary.target", a["target"], "expected {bad: good}");
      for (const auto& kv : a["target"])
        st.target[scalar<int>(kv.first, "adversary.target")] = scalar<int>(kv.second, "adversary.target");
    }
    if (a["group_a"]) st.group_a = node_set(a["group_a"], "adversary.group_a");
    if (a["group_b"]) st.group_b = node_set(a["group_b"], "adversary.group_b");
    for (std::size_t d : st.disable)
      if (d >= s.model.size()) fail("adversary.disable", a["disable"], "CTV index " + std::to_string(d) + " out of range");
  } else if (!s.bad.empty()) {
    fail("adversary", root, "bad nodes need an adversary section");
  }

  if (root["params"]) s.params = params(root["params"]);

  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("(file)", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace adhoc
