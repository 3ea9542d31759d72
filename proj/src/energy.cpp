#include "uwbt/energy.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace uwbt {

std::string to_string(PowerState s) {
  switch (s) {
    case PowerState::Sleep: return "sleep";
    case PowerState::AnchorTransceiverOn: return "transceiver_on";
    case PowerState::AnchorSelfLoc: return "selfloc";
    case PowerState::TagLocalization: return "tag_loc";
    case PowerState::LoraTx: return "lora_tx";
  }
  return "?";
}

std::optional<PowerState> parse_power_state(const std::string& s) {
  for (std::size_t i = 0; i < kPowerStateCount; ++i) {
    const auto st = static_cast<PowerState>(i);
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

double StateTrace::active_s() const {
  double t = 0.0;
  for (const auto& seg : segments)
    if (seg.state != PowerState::Sleep) t += seg.duration_s;
  return t;
}

double StateTrace::duration_of(PowerState s) const {
  double t = 0.0;
  for (const auto& seg : segments)
    if (seg.state == s) t += seg.duration_s;
  return t;
}

namespace {

constexpr double kRelTol = 1e-9;

}  // namespace

double average_power(const StateTrace& trace, const PowerProfile& profile) {
  if (!(trace.period_s > 0.0)) throw TraceError("trace period must be > 0");
  double total = 0.0, energy = 0.0;
  for (const auto& seg : trace.segments) {
    if (!(seg.duration_s >= 0.0)) throw TraceError("negative segment duration");
    total += seg.duration_s;
    energy += profile.power(seg.state) * seg.duration_s;
  }
  if (total > trace.period_s * (1.0 + kRelTol))
    throw TraceError("segment durations " + std::to_string(total) + " s exceed period " +
                     std::to_string(trace.period_s) + " s");
  energy += profile.power(PowerState::Sleep) * (trace.period_s - total);
  return energy / trace.period_s;
}

StateTrace scale_period(const StateTrace& trace, double new_period_s) {
  StateTrace out;
  out.node = trace.node;
  out.period_s = new_period_s;
  for (const auto& seg : trace.segments)
    if (seg.state != PowerState::Sleep) out.segments.push_back(seg);
  const double active = out.active_s();
  if (!(new_period_s >= active)) throw TraceError("new period shorter than the active segments");
  out.segments.push_back({PowerState::Sleep, new_period_s - active});
  return out;
}

double battery_lifetime_hours(const Battery& battery, double avg_power_mw) {
  if (!(avg_power_mw > 0.0)) throw std::invalid_argument("average power must be > 0");
  return battery.energy_mwh() / avg_power_mw;
}

double battery_lifetime_days(const Battery& battery, double avg_power_mw) {
  return battery_lifetime_hours(battery, avg_power_mw) / 24.0;
}

StateTrace canonical_anchor_trace(double period_s, bool with_lora, const PowerProfile& profile) {
  StateTrace t;
  t.period_s = period_s;
  t.segments.push_back({PowerState::AnchorTransceiverOn, profile.transceiver_on_s});
  t.segments.push_back({PowerState::AnchorSelfLoc, profile.selfloc_s});
  if (with_lora) t.segments.push_back({PowerState::LoraTx, profile.lora_tx_s});
  return scale_period(t, period_s);
}

StateTrace canonical_tag_trace(double period_s, bool with_lora, const PowerProfile& profile) {
  StateTrace t;
  t.period_s = period_s;
  t.segments.push_back({PowerState::TagLocalization, profile.tag_loc_s});
  if (with_lora) t.segments.push_back({PowerState::LoraTx, profile.lora_tx_s});
  return scale_period(t, period_s);
}

namespace {

int priority(PowerState s) {
  switch (s) {
    case PowerState::LoraTx: return 4;
    case PowerState::AnchorSelfLoc: return 3;
    case PowerState::TagLocalization: return 2;
    case PowerState::AnchorTransceiverOn: return 1;
    case PowerState::Sleep: return 0;
  }
  return 0;
}

}  // namespace

StateTrace trace_from_simulation(DeviceId node, std::span<const ActivityInterval> activity, SimTime window_begin,
                                 SimTime window_end) {
  if (window_end <= window_begin) throw TraceError("empty accounting window");

  // Sweep over interval boundaries; each elementary span takes the highest-priority active state.
  std::vector<std::int64_t> cuts{window_begin.ns, window_end.ns};
  for (const auto& a : activity) {
    cuts.push_back(std::clamp(a.begin.ns, window_begin.ns, window_end.ns));
    cuts.push_back(std::clamp(a.end.ns, window_begin.ns, window_end.ns));
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::array<std::int64_t, kPowerStateCount> ns_in{};
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const std::int64_t lo = cuts[k], hi = cuts[k + 1];
    PowerState best = PowerState::Sleep;
    for (const auto& a : activity)
      if (a.begin.ns <= lo && a.end.ns >= hi && priority(a.state) > priority(best)) best = a.state;
    ns_in[static_cast<std::size_t>(best)] += hi - lo;
  }

  StateTrace t;
  t.node = node;
  t.period_s = static_cast<double>(window_end.ns - window_begin.ns) * 1e-9;
  double active = 0.0;
  for (std::size_t i = 1; i < kPowerStateCount; ++i) {
    if (ns_in[i] == 0) continue;
    const double d = static_cast<double>(ns_in[i]) * 1e-9;
    t.segments.push_back({static_cast<PowerState>(i), d});
    active += d;
  }
  t.segments.push_back({PowerState::Sleep, t.period_s - active});
  return t;
}

}  // namespace uwbt
