#include "adhoc/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <sstream>

namespace adhoc {

void ClockParams::validate() const {
  if (a_max < 1) throw std::invalid_argument("a_max: must be >= 1");
  if (u0 < 0) throw std::invalid_argument("u0: must be >= 0");
  if (quantum <= 0) throw std::invalid_argument("quantum: must be > 0");
  if (k_delay < 1) throw std::invalid_argument("k_delay: must be >= 1");
  if (eps_a <= 0 || eps_a >= 1) throw std::invalid_argument("eps_a: must lie in (0, 1)");
  if (eps_b < 0) throw std::invalid_argument("eps_b: must be >= 0");
}

std::string describe(const Mode& m) {
  switch (m.kind) {
    case ModeKind::Silent: return "S";
    case ModeKind::Listen: return "L";
    case ModeKind::Jam: return "J";
    case ModeKind::Transmit: {
      std::ostringstream os;
      os << 'T' << m.target << '@' << m.rate;
      return os.str();
    }
  }
  return "?";
}

std::string describe(const Ctv& c) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += ',';
    out += describe(c[i]);
  }
  return out;
}

Ctv parse_ctv(const std::string& text, int n) {
  Ctv out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
    if (tok == "S") {
      out.push_back(Mode::silent());
    } else if (tok == "L") {
      out.push_back(Mode::listen());
    } else if (tok == "J") {
      out.push_back(Mode::jam());
    } else if (!tok.empty() && tok[0] == 'T') {
      auto at = tok.find('@');
      if (at == std::string::npos) throw std::invalid_argument("ctv mode '" + tok + "' lacks @rate");
      out.push_back(Mode::transmit(std::stoi(tok.substr(1, at - 1)), std::stod(tok.substr(at + 1))));
    } else {
      throw std::invalid_argument("unknown ctv mode '" + tok + "'");
    }
  }
  if (static_cast<int>(out.size()) != n)
    throw std::invalid_argument("ctv '" + text + "' has " + std::to_string(out.size()) + " modes, expected " +
                                std::to_string(n));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& m = out[i];
    if (m.kind == ModeKind::Transmit && (m.target < 1 || m.target > n || m.target == static_cast<int>(i) + 1))
      throw std::invalid_argument("ctv '" + text + "' has an invalid transmit target");
  }
  return out;
}

std::optional<std::size_t> RateModel::silent_entry() const {
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto& modes = entries[e].modes;
    if (std::all_of(modes.begin(), modes.end(), [](const Mode& m) { return m.kind == ModeKind::Silent; }))
      return e;
  }
  return std::nullopt;
}

EnabledSet all_entries(const RateModel& model) {
  EnabledSet out(model.size());
  for (std::size_t e = 0; e < out.size(); ++e) out[e] = e;
  return out;
}

Digraph rate_graph(const std::vector<RateMatrix>& rates, int n) {
  Digraph g(n);
  for (const auto& r : rates)
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j)
        if (i != j && rate(r, i, j) > 0) g.add(i, j);
  return g;
}

Digraph enabled_graph(const RateModel& model, const EnabledSet& enabled) {
  std::vector<RateMatrix> rates;
  rates.reserve(enabled.size());
  for (auto e : enabled) rates.push_back(model.entries.at(e).rates);
  return rate_graph(rates, model.n);
}

NodeSet good_component(const Digraph& graph, const NodeSet& good) {
  if (good.empty()) return {};
  const int n = graph.size();
  NodeSet seen{*good.begin()};
  std::queue<NodeId> frontier;
  frontier.push(*good.begin());
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v = 1; v <= n; ++v) {
      if (v != u && graph.bidirectional(u, v) && seen.insert(v).second) frontier.push(v);
    }
  }
  for (NodeId g : good) {
    if (!seen.contains(g))
      throw AssumptionCViolated("good nodes " + std::to_string(*good.begin()) + " and " + std::to_string(g) +
                                " are not bidirectionally connected");
  }
  return seen;
}

std::vector<NodePair> UtilitySpec::active_pairs(const NodeSet& subset) const {
  std::vector<NodePair> out;
  for (const auto& [pair, w] : weights) {
    const auto& [i, j] = pair;
    if (!subset.contains(i) || !subset.contains(j)) continue;
    if (!scope.empty() && (!scope.contains(i) || !scope.contains(j))) continue;
    if (family == UtilityFamily::MinFairness && w <= 0) continue;
    out.push_back(pair);
  }
  return out;
}

std::vector<std::size_t> jammable_entries(const RateModel& model, const NodeSet& bad) {
  std::vector<std::size_t> out;
  if (bad.empty()) return out;
  for (std::size_t e = 0; e < model.size(); ++e) {
    const auto& entry = model.entries[e];
    bool drops = false;
    for (int i = 1; i <= model.n && !drops; ++i)
      for (int j = 1; j <= model.n && !drops; ++j)
        if (i != j && good_involved(i, j, bad) && rate(entry.jammed, i, j) < rate(entry.rates, i, j)) drops = true;
    if (drops) out.push_back(e);
  }
  return out;
}

bool half_duplex_ok(const RateModel& model, const NodeSet& bad) {
  for (const auto& entry : model.entries) {
    for (int i = 1; i <= model.n; ++i) {
      for (int j = 1; j <= model.n; ++j) {
        if (i == j || rate(entry.rates, i, j) <= 0) continue;
        if (!bad.contains(j) && entry.modes[j - 1].kind != ModeKind::Listen) return false;
        if (!bad.contains(i)) {
          const auto& m = entry.modes[i - 1];
          if (m.kind != ModeKind::Transmit || m.target != j) return false;
        }
      }
    }
  }
  return true;
}

namespace {

std::vector<double> flatten(const RateMatrix& r) {
  return std::vector<double>(r.data(), r.data() + r.size());
}

}  // namespace

bool downward_closed(const RateModel& model) {
  std::set<std::vector<double>> present;
  for (const auto& e : model.entries) present.insert(flatten(e.rates));
  std::vector<double> levels = model.lambda;
  levels.push_back(0.0);
  std::sort(levels.begin(), levels.end());

  for (const auto& entry : model.entries) {
    std::vector<std::pair<int, int>> links;
    for (int i = 0; i < model.n; ++i)
      for (int j = 0; j < model.n; ++j)
        if (i != j && entry.rates(i, j) > 0) links.emplace_back(i, j);
    RateMatrix probe = zero_rates(model.n);
    std::function<bool(std::size_t)> walk = [&](std::size_t k) -> bool {
      if (k == links.size()) return present.contains(flatten(probe));
      auto [i, j] = links[k];
      for (double v : levels) {
        if (v > entry.rates(i, j)) break;
        probe(i, j) = v;
        if (!walk(k + 1)) return false;
      }
      probe(i, j) = 0;
      return true;
    };
    if (!walk(0)) return false;
  }
  return true;
}

bool clocks_within_bounds(const std::vector<AffineClock>& clocks, const NodeSet& good, const ClockParams& params) {
  for (NodeId i : good) {
    for (NodeId j : good) {
      if (i == j) continue;
      auto [a, b] = relative(clocks[i - 1], clocks[j - 1]);
      if (a <= 0 || a > params.a_max) return false;
      if (abs_value(b) > params.a_max * params.u0) return false;
    }
  }
  return true;
}

RateMatrix default_jammed(const RateMatrix& rates, const NodeSet& bad) {
  RateMatrix out = rates;
  const int n = static_cast<int>(rates.rows());
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j)
      if (i != j && (bad.contains(i) != bad.contains(j))) rate(out, i, j) = 0;
  return out;
}

RateModel geometric_model(const std::vector<Position>& nodes, const GeometricRadio& radio, const NodeSet& bad) {
  if (radio.lambda.size() != radio.sinr_threshold.size())
    throw std::invalid_argument("radio: lambda and sinr_threshold differ in length");
  const int n = static_cast<int>(nodes.size());
  Matrix<double> gain = Matrix<double>::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) {
        double d = std::hypot(nodes[i].x - nodes[j].x, nodes[i].y - nodes[j].y);
        gain(i, j) = std::pow(std::max(d, 1e-9), -radio.path_loss);
      }

  std::vector<std::vector<Mode>> choices(n);
  for (int i = 0; i < n; ++i) {
    choices[i].push_back(Mode::silent());
    choices[i].push_back(Mode::listen());
    choices[i].push_back(Mode::jam());
    for (int j = 1; j <= n; ++j)
      if (j != i + 1)
        for (double rho : radio.lambda) choices[i].push_back(Mode::transmit(j, rho));
  }

  RateModel model;
  model.n = n;
  model.lambda = radio.lambda;
  std::sort(model.lambda.begin(), model.lambda.end());
  model.mode_bound = static_cast<int>(choices[0].size());

  auto realize = [&](const Ctv& c, bool jam) {
    RateMatrix r = zero_rates(n);
    for (int i = 0; i < n; ++i) {
      const Mode& m = c[i];
      if (m.kind != ModeKind::Transmit) continue;
      int j = m.target - 1;
      if (c[j].kind != ModeKind::Listen) continue;
      double interference = radio.noise;
      for (int k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        bool emits = c[k].kind == ModeKind::Transmit || c[k].kind == ModeKind::Jam || (jam && bad.contains(k + 1));
        if (emits) interference += radio.power * gain(k, j);
      }
      double sinr = radio.power * gain(i, j) / interference;
      auto idx = std::find(radio.lambda.begin(), radio.lambda.end(), m.rate) - radio.lambda.begin();
      if (sinr >= radio.sinr_threshold[idx]) r(i, j) = m.rate;
    }
    if (jam) {
      for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j)
          if (i != j && bad.contains(i) != bad.contains(j)) rate(r, i, j) = 0;
    }
    return r;
  };

  std::set<std::pair<std::vector<double>, std::vector<double>>> seen;
  Ctv c(n);
  std::function<void(int, int)> walk = [&](int i, int transmitters) {
    if (i == n) {
      RateMatrix r = realize(c, false);
      RateMatrix rj = realize(c, true);
      if (seen.insert({flatten(r), flatten(rj)}).second)
        model.entries.push_back({describe(c), c, r, rj});
      return;
    }
    for (const Mode& m : choices[i]) {
      int t = transmitters + (m.kind == ModeKind::Transmit || m.kind == ModeKind::Jam ? 1 : 0);
      if (t > radio.max_transmitters) continue;
      c[i] = m;
      walk(i + 1, t);
    }
  };
  walk(0, 0);
  return model;
}

}  // namespace adhoc
