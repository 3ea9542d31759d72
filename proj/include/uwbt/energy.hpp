#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "uwbt/model.hpp"

namespace uwbt {

enum class PowerState : std::uint8_t { Sleep, AnchorTransceiverOn, AnchorSelfLoc, TagLocalization, LoraTx };

inline constexpr std::size_t kPowerStateCount = 5;

std::string to_string(PowerState s);
std::optional<PowerState> parse_power_state(const std::string& s);

/// Measured per-state power draw at 3.7 V and the canonical active durations.
struct PowerProfile {
  std::array<double, kPowerStateCount> power_mw{0.04366, 140.93, 40.55, 52.32, 67.82};
  double transceiver_on_s{3.74};
  double selfloc_s{0.156};
  double tag_loc_s{0.063};
  double lora_tx_s{4.17};

  double power(PowerState s) const { return power_mw[static_cast<std::size_t>(s)]; }
};

struct TraceSegment {
  PowerState state{PowerState::Sleep};
  double duration_s{};
};

struct StateTrace {
  DeviceId node{};
  std::vector<TraceSegment> segments;
  double period_s{};

  double active_s() const;  // total non-sleep time
  double duration_of(PowerState s) const;
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// sum(P_s * t_s) / period; time not covered by segments is spent asleep.
double average_power(const StateTrace& trace, const PowerProfile& profile = {});

/// Keeps the active segments and refills sleep to the new period.
StateTrace scale_period(const StateTrace& trace, double new_period_s);

struct Battery {
  double capacity_mah{};
  double voltage{3.7};

  double energy_mwh() const { return capacity_mah * voltage; }
};

double battery_lifetime_hours(const Battery& battery, double avg_power_mw);
double battery_lifetime_days(const Battery& battery, double avg_power_mw);

/// Traces built from the profile's canonical durations.
StateTrace canonical_anchor_trace(double period_s, bool with_lora = true, const PowerProfile& profile = {});
StateTrace canonical_tag_trace(double period_s, bool with_lora = true, const PowerProfile& profile = {});

/// One simulated activity window on the true-time axis.
struct ActivityInterval {
  PowerState state{PowerState::Sleep};
  SimTime begin{};
  SimTime end{};
};

/// Clips activity to [window_begin, window_end), resolves overlaps by state
/// priority (LoRa > self-loc > tag loc > transceiver on) and fills the rest with sleep.
StateTrace trace_from_simulation(DeviceId node, std::span<const ActivityInterval> activity, SimTime window_begin,
                                 SimTime window_end);

}  // namespace uwbt
