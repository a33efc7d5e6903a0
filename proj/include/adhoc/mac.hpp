#pragma once

#include "adhoc/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace adhoc {

/// Multi-scale burst code. The node of rank r (its position in the roster)
/// transmits during local [k p_r, k p_r + b_r) for every integer k and
/// listens otherwise, with b_0 = 4 a_max W, p_r = M b_r, b_{r+1} = p_r.
/// Faster ranks find gaps inside slower ranks' bursts and slower ranks fit
/// whole bursts between faster ranks' sparse bursts, so every ordered pair
/// gets a stretch of reference length 2W with only the sender on the air.
struct OmcSchedule {
  int n{0};
  Rational a_max{1};
  Rational packet{1};  // W, reference units
  Rational multiplier{1};
  std::vector<Rational> burst;   // local counts, per rank
  std::vector<Rational> period;  // local counts, per rank
  Rational t_mac{0};             // reference units

  bool transmitting(int rank, const Rational& local) const;
  /// Start of the burst containing `local`, or of the next one.
  Rational burst_at_or_after(int rank, const Rational& local) const;
  /// Reference length of a clear stretch that carries one full packet
  /// regardless of where the packet copies start.
  Rational clear_length() const { return 2 * packet; }
};

OmcSchedule build_omc(int n, const Rational& a_max, const Rational& quantum, const Rational& packet);

struct OmcEmitter {
  int rank{0};
  AffineClock clock;
};

struct Interval {
  Time begin;
  Time end;
};

/// Earliest reference time x >= from with x + clear_length() <= until such
/// that the sender is inside one burst over [x, x + clear_length()) and no
/// other emitter's burst nor any jam interval touches it.
std::optional<Time> first_clear_window(const OmcSchedule& omc, const OmcEmitter& sender,
                                       const std::vector<OmcEmitter>& others, const std::vector<Interval>& jams,
                                       const Time& from, const Time& until);

/// Stage boundaries in local counts. Each node reads them on its own clock.
struct StagePlan {
  std::vector<Rational> bounds;  // bounds[k] opens stage k; one more than tags
  std::vector<std::string> tags;
  Rational a_max{1};
  Rational u0{0};

  std::size_t stages() const { return tags.size(); }
  /// Local send time inside stage k that guarantees in-stage delivery.
  Rational send_time(std::size_t k) const { return a_max * bounds[k] + a_max * a_max * u0; }
  /// Stage index for a local reading, or nullopt outside the plan.
  std::optional<std::size_t> stage_of(const Rational& local) const;
  std::size_t index_of(const std::string& tag) const;
};

struct StageSpec {
  std::string tag;
  Rational t_mac;      // reference units
  Rational not_before{0};  // local counts; lifts the opening boundary
};

/// t_{k+1} = a^2 t_k + 2 a^3 U_0 + a^3 T_MAC(W_k), with each boundary raised
/// to its stage's `not_before` when that is later.
StagePlan stage_plan(const Rational& t0, const std::vector<StageSpec>& stages, const ClockParams& params);

}  // namespace adhoc
