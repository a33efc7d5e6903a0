#include "adhoc/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adhoc {

std::vector<std::size_t> FeasibleSet::ctvs() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.ctv);
  return out;
}

bool FeasibleSet::contains(std::size_t ctv) const {
  return std::any_of(entries.begin(), entries.end(), [&](const FeasibleEntry& e) { return e.ctv == ctv; });
}

FeasibleSet true_feasible_set(const RateModel& model, const EnabledSet& enabled) {
  FeasibleSet out;
  for (auto e : enabled) out.entries.push_back({e, model.entries.at(e).rates});
  std::sort(out.entries.begin(), out.entries.end(),
            [](const FeasibleEntry& a, const FeasibleEntry& b) { return a.ctv < b.ctv; });
  return out;
}

namespace {

template <typename Scalar>
Scalar scalar_of(double v) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return v;
  } else {
    return to_rational(v);
  }
}

struct LpLayout {
  std::vector<NodePair> links;
  std::vector<NodePair> commodities;
  std::vector<double> weights;
  bool min_fair{false};
  std::size_t n_alpha{0};

  std::size_t x_var(std::size_t c) const { return n_alpha + c * (1 + links.size()); }
  std::size_t f_var(std::size_t c, std::size_t l) const { return x_var(c) + 1 + l; }
  std::size_t t_var() const { return n_alpha + commodities.size() * (1 + links.size()); }
  std::size_t vars() const { return t_var() + (min_fair ? 1 : 0); }
};

LpLayout layout_for(const FeasibleSet& feasible, const UtilitySpec& utility, const NodeSet& component, int n) {
  LpLayout lay;
  lay.n_alpha = feasible.entries.size();
  lay.min_fair = utility.family == UtilityFamily::MinFairness;
  for (int i = 1; i <= n; ++i) {
    if (!component.contains(i)) continue;
    for (int j = 1; j <= n; ++j) {
      if (i == j || !component.contains(j)) continue;
      bool any = std::any_of(feasible.entries.begin(), feasible.entries.end(),
                             [&](const FeasibleEntry& e) { return rate(e.claimed, i, j) > 0; });
      if (any) lay.links.emplace_back(i, j);
    }
  }
  for (const auto& p : utility.active_pairs(component)) {
    double w = utility.weights.at(p);
    if (!lay.min_fair && w == 0) continue;
    lay.commodities.push_back(p);
    lay.weights.push_back(w);
  }
  return lay;
}

template <typename Scalar>
LinearProgram<Scalar> build_lp(const LpLayout& lay, const FeasibleSet& feasible, const NodeSet& component) {
  const std::size_t nv = lay.vars();
  const std::size_t nc = lay.commodities.size();
  const std::size_t nl = lay.links.size();
  std::vector<std::vector<std::pair<std::size_t, Scalar>>> rows;
  std::vector<Scalar> rhs;

  // time shares
  {
    std::vector<std::pair<std::size_t, Scalar>> r;
    for (std::size_t e = 0; e < lay.n_alpha; ++e) r.emplace_back(e, Scalar(1));
    rows.push_back(std::move(r));
    rhs.push_back(Scalar(1));
  }
  // link capacity
  for (std::size_t l = 0; l < nl; ++l) {
    std::vector<std::pair<std::size_t, Scalar>> r;
    for (std::size_t c = 0; c < nc; ++c) r.emplace_back(lay.f_var(c, l), Scalar(1));
    for (std::size_t e = 0; e < lay.n_alpha; ++e) {
      double cap = rate(feasible.entries[e].claimed, lay.links[l].first, lay.links[l].second);
      if (cap > 0) r.emplace_back(e, -scalar_of<Scalar>(cap));
    }
    rows.push_back(std::move(r));
    rhs.push_back(Scalar(0));
  }
  // conservation
  for (std::size_t c = 0; c < nc; ++c) {
    const auto [s, d] = lay.commodities[c];
    for (NodeId v : component) {
      if (v == s) continue;
      std::vector<std::pair<std::size_t, Scalar>> r;
      // outflow - inflow <= 0, and <= -x at the destination
      for (std::size_t l = 0; l < nl; ++l) {
        if (lay.links[l].first == v) r.emplace_back(lay.f_var(c, l), Scalar(1));
        if (lay.links[l].second == v) r.emplace_back(lay.f_var(c, l), Scalar(-1));
      }
      if (v == d) r.emplace_back(lay.x_var(c), Scalar(1));
      rows.push_back(std::move(r));
      rhs.push_back(Scalar(0));
    }
  }
  if (lay.min_fair) {
    for (std::size_t c = 0; c < nc; ++c) {
      rows.push_back({{lay.t_var(), Scalar(1)}, {lay.x_var(c), Scalar(-1)}});
      rhs.push_back(Scalar(0));
    }
  }

  LinearProgram<Scalar> lp;
  lp.a = Matrix<Scalar>::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(nv));
  lp.b = Vector<Scalar>::Zero(static_cast<Eigen::Index>(rows.size()));
  lp.c = Vector<Scalar>::Zero(static_cast<Eigen::Index>(nv));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (const auto& [j, v] : rows[i]) lp.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += v;
    lp.b(static_cast<Eigen::Index>(i)) = rhs[i];
  }
  if (lay.min_fair) {
    if (nc > 0) lp.c(static_cast<Eigen::Index>(lay.t_var())) = Scalar(1);
  } else {
    for (std::size_t c = 0; c < nc; ++c) lp.c(static_cast<Eigen::Index>(lay.x_var(c))) = scalar_of<Scalar>(lay.weights[c]);
  }
  return lp;
}

}  // namespace

UtilityOptimum max_utility_lp(const FeasibleSet& feasible, const UtilitySpec& utility, const NodeSet& component, int n) {
  const LpLayout lay = layout_for(feasible, utility, component, n);
  UtilityOptimum out;
  out.x = Matrix<double>::Zero(n, n);
  out.alpha.assign(feasible.entries.size(), 0.0);
  if (lay.commodities.empty()) return out;
  const auto sol = solve_lp(build_lp<double>(lay, feasible, component));
  auto val = [&](std::size_t j) { return std::max(0.0, sol.x(static_cast<Eigen::Index>(j))); };
  for (std::size_t e = 0; e < lay.n_alpha; ++e) out.alpha[e] = val(e);
  for (std::size_t c = 0; c < lay.commodities.size(); ++c) {
    const auto [s, d] = lay.commodities[c];
    out.x(s - 1, d - 1) = val(lay.x_var(c));
    Matrix<double> f = Matrix<double>::Zero(n, n);
    for (std::size_t l = 0; l < lay.links.size(); ++l)
      f(lay.links[l].first - 1, lay.links[l].second - 1) = val(lay.f_var(c, l));
    out.flows.emplace(lay.commodities[c], std::move(f));
  }
  out.value = evaluate_utility(utility, out.x, component);
  return out;
}

Rational max_utility_value_exact(const FeasibleSet& feasible, const UtilitySpec& utility, const NodeSet& component,
                                 int n) {
  const LpLayout lay = layout_for(feasible, utility, component, n);
  if (lay.commodities.empty()) return Rational(0);
  return solve_lp(build_lp<Rational>(lay, feasible, component)).objective;
}

std::vector<std::size_t> apportion(const std::vector<double>& alpha, std::size_t total) {
  std::vector<double> share(alpha.begin(), alpha.end());
  for (auto& a : share) a = std::max(0.0, a);
  const double used = std::accumulate(share.begin(), share.end(), 0.0);
  if (used > 1.0) {
    for (auto& a : share) a /= used;
  }
  share.push_back(std::max(0.0, 1.0 - std::min(1.0, used)));

  std::vector<std::size_t> count(share.size());
  std::vector<double> rem(share.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < share.size(); ++i) {
    const double q = share[i] * static_cast<double>(total);
    // snap values within rounding noise of an integer
    const double r = std::round(q);
    const double fl = std::abs(q - r) < 1e-9 ? r : std::floor(q);
    count[i] = static_cast<std::size_t>(fl);
    rem[i] = q - fl;
    assigned += count[i];
  }
  std::vector<std::size_t> order(share.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++count[order[k]];
    ++assigned;
  }
  // snapping can overshoot by a slot; take it back from the smallest remainder
  for (auto it = order.rbegin(); assigned > total && it != order.rend(); ++it) {
    if (count[*it] == 0) continue;
    --count[*it];
    --assigned;
  }
  return count;
}

Schedule discretize(const UtilityOptimum& opt, const FeasibleSet& feasible, const RateModel& model, int n,
                    const Rational& b_slot, const Rational& dead_time) {
  Schedule s;
  s.b_slot = b_slot;
  s.dead_time = dead_time;
  const std::size_t total = slot_count(n);
  const auto counts = apportion(opt.alpha, total);

  // aggregate capacity each link gets over the frame
  Matrix<double> cap = Matrix<double>::Zero(n, n);
  for (std::size_t e = 0; e < feasible.entries.size(); ++e) cap += opt.alpha[e] * feasible.entries[e].claimed;

  for (std::size_t e = 0; e < feasible.entries.size(); ++e) {
    Slot slot;
    slot.entry = e;
    slot.ctv = feasible.entries[e].ctv;
    const auto& modes = model.entries.at(*slot.ctv).modes;
    for (int i = 1; i <= n; ++i) {
      if (modes[i - 1].kind == ModeKind::Transmit) slot.tx.insert(i);
      if (modes[i - 1].kind == ModeKind::Listen) slot.rx.insert(i);
    }
    for (const auto& [commodity, f] : opt.flows) {
      for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
          const double fl = f(i - 1, j - 1);
          if (fl <= 0 || rate(feasible.entries[e].claimed, i, j) <= 0 || cap(i - 1, j - 1) <= 0) continue;
          slot.manifest.push_back({i, j, commodity, std::min(1.0, fl / cap(i - 1, j - 1))});
        }
    }
    for (std::size_t k = 0; k < counts[e]; ++k) s.slots.push_back(slot);
  }
  for (std::size_t k = 0; k < counts.back(); ++k) s.slots.push_back(Slot{});
  return s;
}

FeasibleSet prune(const FeasibleSet& feasible, const std::vector<std::size_t>& failed_ctvs) {
  FeasibleSet out;
  out.iteration = feasible.iteration + 1;
  for (const auto& e : feasible.entries)
    if (std::find(failed_ctvs.begin(), failed_ctvs.end(), e.ctv) == failed_ctvs.end()) out.entries.push_back(e);
  return out;
}

OverheadConstants OverheadConstants::defaults(int n, double a_max, double k_delay) {
  const double data_slots = static_cast<double>(slot_count(n));
  // three control phases (reports, stamp circulation, failure consensus),
  // n rounds each, one slot per ordered pair per round
  const double control_slots = 3.0 * n * n * (n - 1);
  OverheadConstants c;
  c.c1 = control_slots;
  c.c2 = std::pow(a_max, n + 1) * (n + 1) * k_delay;
  c.c3 = 2 * data_slots;
  c.c4 = 2 * control_slots;
  return c;
}

double ProtocolParams::iteration_time(const OverheadConstants& c) const {
  return c.c1 * std::log2(t_life) + c.c2 / eps_a + discovery_time / n_iter + data_time + (c.c3 + c.c4) * dead_time;
}

ParamCheck check_parameters(const ProtocolParams& p, int n, double a_max, double u0, const OverheadConstants& c) {
  ParamCheck out;
  const double blocks = std::ldexp(1.0, n) * p.k_r;
  out.iterations = p.n_iter / (p.n_iter + blocks) >= 1 - p.eps_l;
  const double it = p.iteration_time(c);
  out.data_share = p.data_time / it >= 1 - p.eps_d;
  out.lifetime = p.n_iter * it <= p.t_life;
  out.dead_time = 2 * a_max * a_max * p.eps_a * p.t_life + a_max * a_max * u0 <= p.dead_time;
  return out;
}

ParamResiduals parameter_residuals(const ProtocolParams& p, int n, double a_max, double u0, const OverheadConstants& c) {
  ParamResiduals r;
  const double blocks = std::ldexp(1.0, n) * p.k_r;
  const double it = p.iteration_time(c);
  r.iterations = p.n_iter / (p.n_iter + blocks) - (1 - p.eps_l);
  r.data_share = p.data_time / it - (1 - p.eps_d);
  r.lifetime = p.t_life - p.n_iter * it;
  r.dead_time = p.dead_time - (2 * a_max * a_max * p.eps_a * p.t_life + a_max * a_max * u0);
  return r;
}

int minimal_iterations(int n, int k_r, double eps_l) {
  const double blocks = std::ldexp(1.0, n) * k_r;
  if (eps_l >= 1) return 1;
  // n_iter >= (1 - eps_l) blocks / eps_l
  int guess = std::max(1, static_cast<int>(std::floor((1 - eps_l) * blocks / eps_l)) - 1);
  while (guess / (guess + blocks) < 1 - eps_l) ++guess;
  while (guess > 1 && (guess - 1) / (guess - 1 + blocks) >= 1 - eps_l) --guess;
  return guess;
}

ProtocolParams select_parameters(int n, double a_max, double u0, int k_r, double eps, const OverheadConstants& c,
                                 double t_life_ceiling, double discovery_time) {
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("select_parameters: eps must lie in (0, 1)");
  ProtocolParams p;
  p.k_r = std::max(1, k_r);
  p.eps_l = p.eps_d = 1 - std::sqrt(1 - eps);
  p.n_iter = minimal_iterations(n, p.k_r, p.eps_l);
  p.discovery_time = discovery_time;
  const double a2 = a_max * a_max;
  // the dead-time term then consumes at most a quarter of the lifetime
  p.eps_a = std::min(0.1, p.eps_d / (8.0 * p.n_iter * (c.c3 + c.c4) * a2));
  const double slack = 1 + 1e-9;
  for (double t = 2; t <= t_life_ceiling; t *= 2) {
    p.t_life = t;
    p.dead_time = (2 * a2 * p.eps_a * t + a2 * u0) * slack;
    const double overhead =
        c.c1 * std::log2(t) + c.c2 / p.eps_a + discovery_time / p.n_iter + (c.c3 + c.c4) * p.dead_time;
    p.data_time = overhead * (1 - p.eps_d) / p.eps_d * slack;
    if (check_parameters(p, n, a_max, u0, c).all()) return p;
  }
  throw NoFeasibleParams("no lifetime below " + std::to_string(t_life_ceiling) + " satisfies the parameter inequalities");
}

MinMaxResult minmax_oracle(const RateModel& model, const NodeSet& good, const std::vector<std::size_t>& jammable,
                           const UtilitySpec& utility, std::size_t budget) {
  if (jammable.size() >= 63 || (std::size_t{1} << jammable.size()) > budget)
    throw TooLarge("disable family has 2^" + std::to_string(jammable.size()) + " members, budget " +
                   std::to_string(budget));
  MinMaxResult out;
  const std::size_t sets = std::size_t{1} << jammable.size();
  for (std::size_t mask = 0; mask < sets; ++mask) {
    std::vector<std::size_t> disabled;
    for (std::size_t b = 0; b < jammable.size(); ++b)
      if (mask >> b & 1u) disabled.push_back(jammable[b]);
    EnabledSet enabled;
    for (std::size_t e = 0; e < model.size(); ++e)
      if (std::find(disabled.begin(), disabled.end(), e) == disabled.end()) enabled.push_back(e);
    NodeSet comp;
    try {
      comp = good_component(enabled_graph(model, enabled), good);
    } catch (const AssumptionCViolated&) {
      continue;  // not an admissible disable set
    }
    const double v = max_utility_lp(true_feasible_set(model, enabled), utility, comp, model.n).value;
    out.per_set.emplace_back(disabled, v);
    if (out.per_set.size() == 1 || v < out.value) {
      out.value = v;
      out.argmin = disabled;
    }
  }
  return out;
}

}  // namespace adhoc
