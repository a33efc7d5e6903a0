#include "adhoc/mac.hpp"

#include <algorithm>
#include <stdexcept>

namespace adhoc {

namespace {

Rational ceil_to(const Rational& v, const Rational& quantum) { return Rational(ceil_int(v / quantum)) * quantum; }

}  // namespace

bool OmcSchedule::transmitting(int rank, const Rational& local) const {
  const Rational& p = period[rank];
  Rational k(floor_int(local / p));
  return local - k * p < burst[rank];
}

Rational OmcSchedule::burst_at_or_after(int rank, const Rational& local) const {
  const Rational& p = period[rank];
  Rational start = Rational(floor_int(local / p)) * p;
  return local - start < burst[rank] ? start : start + p;
}

OmcSchedule build_omc(int n, const Rational& a_max, const Rational& quantum, const Rational& packet) {
  if (n < 2) throw std::invalid_argument("n: need at least two nodes");
  if (packet <= 0) throw std::invalid_argument("packet: must be > 0");
  if (a_max < 1) throw std::invalid_argument("a_max: must be >= 1");
  OmcSchedule omc;
  omc.n = n;
  omc.a_max = a_max;
  omc.packet = packet;
  const Rational& A = a_max;
  omc.multiplier = Rational(ceil_int(8 * n * A * A));
  const Rational& M = omc.multiplier;
  const Rational w = 2 * A * packet;  // local span of a clear stretch, worst case

  Rational b = ceil_to(2 * w, quantum);
  for (int r = 0; r < n; ++r) {
    omc.burst.push_back(b);
    omc.period.push_back(M * b);
    b *= M;
  }

  // faster ranks must leave a clear stretch inside every burst
  for (int i = 1; i < n; ++i) {
    Rational blocked(0);
    for (int r = 0; r < i; ++r) blocked += (omc.burst[i] * A / omc.period[r] + 2) * (A * omc.burst[r] + w);
    if (!(omc.burst[i] - w > blocked)) throw std::logic_error("burst code construction violated its gap condition");
  }

  // window (sender-local) that holds one whole sender burst clear of slower ranks
  Rational worst(0);
  for (int i = 0; i < n; ++i) {
    const Rational& bi = omc.burst[i];
    const Rational& pi = omc.period[i];
    Rational num = bi + pi, den(1);
    for (int r = i + 1; r < n; ++r) {
      Rational spread = A * omc.burst[r] + bi + pi;
      num += 2 * spread;
      den -= A * spread / omc.period[r];
    }
    if (den <= 0) throw std::logic_error("burst code construction has no finite window");
    worst = std::max(worst, num / den);
  }
  omc.t_mac = A * worst;
  return omc;
}

std::optional<Time> first_clear_window(const OmcSchedule& omc, const OmcEmitter& sender,
                                       const std::vector<OmcEmitter>& others, const std::vector<Interval>& jams,
                                       const Time& from, const Time& until) {
  const Rational L = omc.clear_length();
  const Rational& ps = omc.period[sender.rank];
  const Rational& bs = omc.burst[sender.rank];
  Time x = from;
  while (x + L <= until) {
    const Rational tau = sender.clock.exact(x);
    const Rational start = Rational(floor_int(tau / ps)) * ps;
    if (tau - start >= bs || x + L > sender.clock.when(start + bs)) {
      x = sender.clock.when(start + ps);
      continue;
    }
    const Time y = x + L;
    std::optional<Time> blocked;
    auto block = [&](const Time& e) {
      if (!blocked || e > *blocked) blocked = e;
    };
    for (const auto& o : others) {
      const Rational& p = omc.period[o.rank];
      const Rational& b = omc.burst[o.rank];
      const Rational ta = o.clock.exact(x);
      const Rational tb = o.clock.exact(y);
      const Rational k0 = Rational(floor_int(ta / p)) * p;
      if (ta - k0 < b) {
        block(o.clock.when(k0 + b));
      } else if (k0 + p < tb) {
        block(o.clock.when(k0 + p + b));
      }
    }
    for (const auto& j : jams)
      if (j.begin < y && j.end > x) block(j.end);
    if (!blocked) return x;
    x = *blocked;
  }
  return std::nullopt;
}

std::optional<std::size_t> StagePlan::stage_of(const Rational& local) const {
  if (bounds.empty() || local < bounds.front() || local >= bounds.back()) return std::nullopt;
  auto it = std::upper_bound(bounds.begin(), bounds.end(), local);
  return static_cast<std::size_t>(it - bounds.begin()) - 1;
}

std::size_t StagePlan::index_of(const std::string& tag) const {
  auto it = std::find(tags.begin(), tags.end(), tag);
  if (it == tags.end()) throw std::out_of_range("no stage tagged '" + tag + "'");
  return static_cast<std::size_t>(it - tags.begin());
}

StagePlan stage_plan(const Rational& t0, const std::vector<StageSpec>& stages, const ClockParams& params) {
  if (t0 < 0) throw std::invalid_argument("t0: must be >= 0");
  StagePlan plan;
  plan.a_max = params.a_max;
  plan.u0 = params.u0;
  const Rational& A = params.a_max;
  const Rational A2 = A * A, A3 = A2 * A;
  Rational t = t0;
  for (const auto& s : stages) {
    t = std::max(t, s.not_before);
    plan.bounds.push_back(t);
    plan.tags.push_back(s.tag);
    t = A2 * t + 2 * A3 * params.u0 + A3 * s.t_mac;
  }
  plan.bounds.push_back(t);
  return plan;
}

}  // namespace adhoc
