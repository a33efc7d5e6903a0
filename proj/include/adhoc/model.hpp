#pragma once

#include "adhoc/rational.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adhoc {

/// Node identifiers run 1..n; the roster is globally known.
using NodeId = int;
using NodeSet = std::set<NodeId>;
using NodePair = std::pair<NodeId, NodeId>;

class AssumptionCViolated : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ClockParams {
  Rational a_max{1};    // relative skew bound, >= 1
  Rational u0{0};       // max turn-on stagger (reference time)
  Rational quantum{1};  // clock reading granularity (local counts)
  Rational k_delay{1};  // consistency-check per-hop delay bound (counts)
  Rational eps_a{Rational(1, 10)};
  Rational eps_b{0};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// tau(t) = skew * t + offset, read only through `read`.
struct AffineClock {
  Rational skew{1};
  Rational offset{0};

  Rational exact(const Time& t) const { return skew * t + offset; }
  Rational read(const Time& t, const Rational& quantum) const {
    return quantize_down(exact(t), quantum);
  }
  /// Reference time at which the exact local reading equals `local`.
  Time when(const Rational& local) const { return (local - offset) / skew; }
};

/// Relative parameters of clock i with respect to clock j: tau_i = a_ij tau_j + b_ij.
inline std::pair<Rational, Rational> relative(const AffineClock& i, const AffineClock& j) {
  Rational a = i.skew / j.skew;
  return {a, i.offset - a * j.offset};
}

enum class ModeKind { Silent, Listen, Jam, Transmit };

struct Mode {
  ModeKind kind{ModeKind::Silent};
  NodeId target{0};
  double rate{0};

  static Mode silent() { return {}; }
  static Mode listen() { return {ModeKind::Listen, 0, 0}; }
  static Mode jam() { return {ModeKind::Jam, 0, 0}; }
  static Mode transmit(NodeId to, double r) { return {ModeKind::Transmit, to, r}; }

  friend bool operator==(const Mode&, const Mode&) = default;
  friend auto operator<=>(const Mode&, const Mode&) = default;
};

/// Concurrent transmission vector: one mode per node, index i-1 for node i.
using Ctv = std::vector<Mode>;

std::string describe(const Mode& m);
std::string describe(const Ctv& c);
/// Inverse of describe(const Ctv&): "T2@1.5,L,S,J".
Ctv parse_ctv(const std::string& text, int n);

/// n x n link rates, row = source, column = destination, zero diagonal.
using RateMatrix = Matrix<double>;

inline RateMatrix zero_rates(int n) { return RateMatrix::Zero(n, n); }
inline double rate(const RateMatrix& r, NodeId i, NodeId j) { return r(i - 1, j - 1); }
inline double& rate(RateMatrix& r, NodeId i, NodeId j) { return r(i - 1, j - 1); }

struct CtvEntry {
  std::string label;
  Ctv modes;
  RateMatrix rates;
  /// Rates realized when every bad node jams alongside its nominal mode.
  RateMatrix jammed;
};

/// Ground-truth rate table. Good nodes only ever see `lambda` and `mode_bound`.
struct RateModel {
  int n{0};
  std::vector<CtvEntry> entries;
  std::vector<double> lambda;
  int mode_bound{0};

  std::size_t size() const { return entries.size(); }
  /// Index of the entry whose every mode is silent, if present.
  std::optional<std::size_t> silent_entry() const;
};

/// Sorted indices into RateModel::entries.
using EnabledSet = std::vector<std::size_t>;

EnabledSet all_entries(const RateModel& model);

struct Digraph {
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> adj;

  explicit Digraph(int n = 0) : adj(Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(n, n, false)) {}
  int size() const { return static_cast<int>(adj.rows()); }
  bool has(NodeId i, NodeId j) const { return adj(i - 1, j - 1); }
  void add(NodeId i, NodeId j) { adj(i - 1, j - 1) = true; }
  bool bidirectional(NodeId i, NodeId j) const { return has(i, j) && has(j, i); }
};

/// Edge ij iff some enabled CTV has r_ij > 0. Rates may be any n x n matrices
/// (claimed or true), supplied per enabled entry.
Digraph enabled_graph(const RateModel& model, const EnabledSet& enabled);
Digraph rate_graph(const std::vector<RateMatrix>& rates, int n);

/// Component of the bidirectional subgraph containing `good`.
NodeSet good_component(const Digraph& graph, const NodeSet& good);

enum class UtilityFamily { WeightedSum, MinFairness };

struct UtilitySpec {
  UtilityFamily family{UtilityFamily::WeightedSum};
  /// Per ordered pair; for min-fairness the pairs with positive weight are the
  /// designated ones.
  std::map<NodePair, double> weights;
  /// Empty means every node.
  NodeSet scope;

  /// Pairs counted when the utility is restricted to `subset`.
  std::vector<NodePair> active_pairs(const NodeSet& subset) const;
};

/// U(x, S). `x` is an n x n throughput matrix.
template <typename Scalar>
Scalar evaluate_utility(const UtilitySpec& spec, const Matrix<Scalar>& x, const NodeSet& subset) {
  const auto pairs = spec.active_pairs(subset);
  if (spec.family == UtilityFamily::WeightedSum) {
    Scalar total(0);
    for (const auto& [i, j] : pairs) total += Scalar(spec.weights.at({i, j})) * x(i - 1, j - 1);
    return total;
  }
  if (pairs.empty()) return Scalar(0);
  Scalar lo = x(pairs.front().first - 1, pairs.front().second - 1);
  for (const auto& [i, j] : pairs) {
    const Scalar& v = x(i - 1, j - 1);
    if (v < lo) lo = v;
  }
  return lo;
}

template <typename Scalar>
Scalar evaluate_utility(const UtilitySpec& spec, const Matrix<Scalar>& x) {
  NodeSet all;
  for (int i = 1; i <= x.rows(); ++i) all.insert(i);
  return evaluate_utility(spec, x, all);
}

/// Entries whose good-involved rates drop when the bad nodes jam; the family
/// of disable sets is the power set of these.
std::vector<std::size_t> jammable_entries(const RateModel& model, const NodeSet& bad);

/// A link with at least one good endpoint.
inline bool good_involved(NodeId i, NodeId j, const NodeSet& bad) {
  return !bad.contains(i) || !bad.contains(j);
}

// -- model checks used by tests and scenario validation --------------------

/// Every positive rate into a good node has that node listening and the
/// source transmitting to it.
bool half_duplex_ok(const RateModel& model, const NodeSet& bad);

/// For every entry and every componentwise-smaller vector drawn from
/// lambda ∪ {0}, some entry realizes it exactly.
bool downward_closed(const RateModel& model);

/// Clocks of good nodes satisfy 0 < a_ij <= a_max and |b_ij| <= a_max U_0.
bool clocks_within_bounds(const std::vector<AffineClock>& clocks, const NodeSet& good,
                          const ClockParams& params);

// -- generators ------------------------------------------------------------

struct Position {
  double x{0};
  double y{0};
};

struct GeometricRadio {
  double power{1.0};
  double noise{1e-3};
  double path_loss{3.0};
  /// Minimum SINR needed to decode at each rate in lambda (same order).
  std::vector<double> sinr_threshold;
  std::vector<double> lambda;
  /// Keep only entries with at most this many simultaneous emitters.
  int max_transmitters{2};
};

/// Enumerates modes {silent, listen, jam, transmit(j, rho)} for every node, bakes
/// SINR decisions into a static table and deduplicates entries by their
/// (rates, jammed) pair.
RateModel geometric_model(const std::vector<Position>& nodes, const GeometricRadio& radio,
                          const NodeSet& bad);

/// Default jam effect for explicit tables: links touching a bad node drop to 0.
RateMatrix default_jammed(const RateMatrix& rates, const NodeSet& bad);

}  // namespace adhoc
