#pragma once

#include "adhoc/model.hpp"
#include "adhoc/simplex.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace adhoc {

class TooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoFeasibleParams : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A CTV still considered usable together with the rates claimed for it.
struct FeasibleEntry {
  std::size_t ctv{0};
  RateMatrix claimed;
};

struct FeasibleSet {
  std::vector<FeasibleEntry> entries;  // sorted by ctv
  int iteration{1};

  std::vector<std::size_t> ctvs() const;
  bool contains(std::size_t ctv) const;
};

/// Feasible set over the true rates of the given entries.
FeasibleSet true_feasible_set(const RateModel& model, const EnabledSet& enabled);

struct UtilityOptimum {
  Matrix<double> x;                      // end-to-end throughput per ordered pair
  std::vector<double> alpha;             // time share, aligned with FeasibleSet::entries
  std::map<NodePair, Matrix<double>> flows;  // commodity -> per-link flow
  double value{0};
};

/// Edge-flow multicommodity LP restricted to `component`. Links leave a
/// commodity's non-source nodes no faster than they enter (extra may be
/// absorbed) and the destination's net inflow bounds the commodity's rate.
UtilityOptimum max_utility_lp(const FeasibleSet& feasible, const UtilitySpec& utility, const NodeSet& component, int n);

/// Same LP in exact arithmetic; returns only the optimum value.
Rational max_utility_value_exact(const FeasibleSet& feasible, const UtilitySpec& utility, const NodeSet& component,
                                 int n);

struct LinkShare {
  NodeId from{0};
  NodeId to{0};
  NodePair commodity{0, 0};
  double fraction{0};  // of the link's rate in this slot
};

struct Slot {
  std::optional<std::size_t> entry;  // index into FeasibleSet::entries; empty means idle
  std::optional<std::size_t> ctv;
  NodeSet tx;
  NodeSet rx;
  std::vector<LinkShare> manifest;
};

struct Schedule {
  std::vector<Slot> slots;
  Rational b_slot{1};
  Rational dead_time{0};

  Rational slot_length() const { return b_slot + 2 * dead_time; }
  /// Start of slot k (0-based) relative to the start of the data stage.
  Rational slot_start(std::size_t k) const { return slot_length() * static_cast<long long>(k); }
  Rational frame_length() const { return slot_length() * static_cast<long long>(slots.size()); }
};

inline std::size_t slot_count(int n) { return static_cast<std::size_t>(n) * n * (n - 1); }
/// Slots taken by failure-record agreement: n rounds of n^2(n-1) slots.
inline std::size_t verification_slot_count(int n) { return static_cast<std::size_t>(n) * slot_count(n); }

/// Largest-remainder apportionment of `total` slots; idle time is a pseudo
/// entry at the end so the result sums to `total`. Ties go to the lower index.
std::vector<std::size_t> apportion(const std::vector<double>& alpha, std::size_t total);

Schedule discretize(const UtilityOptimum& opt, const FeasibleSet& feasible, const RateModel& model, int n,
                    const Rational& b_slot, const Rational& dead_time);

/// C_{k+1} = C_k minus the failed CTVs.
FeasibleSet prune(const FeasibleSet& feasible, const std::vector<std::size_t>& failed_ctvs);

/// Stage costs entering the lifetime budget. c1 multiplies log2(T_life),
/// c2 multiplies 1/eps_a, c3 and c4 multiply the dead time.
struct OverheadConstants {
  double c1{0};
  double c2{0};
  double c3{0};
  double c4{0};

  static OverheadConstants defaults(int n, double t_mac, double k_delay);
};

struct ProtocolParams {
  int n_iter{1};
  double dead_time{0};
  double data_time{0};
  double eps_a{0};
  double t_life{0};
  double eps_l{0};
  double eps_d{0};
  int k_r{1};
  /// Measured discovery length, charged evenly to the iterations.
  double discovery_time{0};

  double iteration_time(const OverheadConstants& c) const;
};

struct ParamCheck {
  bool iterations{false};  // n_iter / (n_iter + 2^n k_r) >= 1 - eps_l
  bool data_share{false};  // B / iteration_time >= 1 - eps_d
  bool lifetime{false};    // n_iter * iteration_time <= T_life
  bool dead_time{false};   // 2 a^2 eps_a T_life + a^2 U0 <= D
  bool all() const { return iterations && data_share && lifetime && dead_time; }
};

ParamCheck check_parameters(const ProtocolParams& p, int n, double a_max, double u0, const OverheadConstants& c);

/// Slack in each of the four inequalities; all nonnegative iff check_parameters passes.
struct ParamResiduals {
  double iterations{0};  // n_iter / (n_iter + 2^n k_r) - (1 - eps_l)
  double data_share{0};  // B / iteration_time - (1 - eps_d)
  double lifetime{0};    // T_life - n_iter * iteration_time
  double dead_time{0};   // D - (2 a^2 eps_a T_life + a^2 U0)
};

ParamResiduals parameter_residuals(const ProtocolParams& p, int n, double a_max, double u0, const OverheadConstants& c);

/// Smallest n_iter with n_iter / (n_iter + 2^n k_r) >= 1 - eps_l.
int minimal_iterations(int n, int k_r, double eps_l);

ProtocolParams select_parameters(int n, double a_max, double u0, int k_r, double eps, const OverheadConstants& c,
                                 double t_life_ceiling = 1e300, double discovery_time = 0);

struct MinMaxResult {
  double value{0};
  /// Disable set (CTV indices) attaining the minimum, first in enumeration order.
  std::vector<std::size_t> argmin;
  std::vector<std::pair<std::vector<std::size_t>, double>> per_set;
};

/// Brute force over the power set of `jammable` (CTV indices the adversary can
/// disable): for each D, the max utility over the true rates of C \ D within
/// F(C \ D).
MinMaxResult minmax_oracle(const RateModel& model, const NodeSet& good, const std::vector<std::size_t>& jammable,
                           const UtilitySpec& utility, std::size_t budget = 1u << 12);

}  // namespace adhoc
