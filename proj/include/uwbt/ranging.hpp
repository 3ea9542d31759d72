#pragma once

#include <cstdint>
#include <random>

#include "uwbt/model.hpp"

namespace uwbt {

inline constexpr double kSpeedOfLight = 299'792'458.0;
/// DW3000-family timestamp quantum: 1 / (128 * 499.2 MHz).
inline constexpr double kDefaultTick = 1.0 / (128.0 * 499.2e6);

using Rng = std::mt19937_64;

struct NodeClock {
  double freq_offset_ppm{0.0};
  double phase_offset_s{0.0};
  double tick_s{kDefaultTick};

  long double rate() const { return 1.0L + static_cast<long double>(freq_offset_ppm) * 1e-6L; }
};

/// Unquantized local reading at a true time given in seconds.
long double local_reading(const NodeClock& clock, long double true_s);
/// Inverse of local_reading.
long double true_time_of(const NodeClock& clock, long double local_s);
/// Local reading rounded to the nearest tick, as an integer tick count.
std::int64_t local_ticks(const NodeClock& clock, long double true_s);
/// quantize(phase + (1 + ppm*1e-6) * t, tick), in seconds.
double local_timestamp(const NodeClock& clock, SimTime true_time);

struct TofEstimate {
  double tof_s{};
  bool clamped{false};  // raw estimate was negative and was clamped to zero
};

/// ToF = (t_round - t_reply / (1 + k)) / 2, where k > 0 means the responder's
/// oscillator runs fast relative to the initiator's. Throws on non-finite input.
TofEstimate cfo_corrected_tof(double t_round, double t_reply, double cfo_ratio);

/// c * tof. Throws std::invalid_argument for negative or non-finite tof.
Distance distance_from_tof(double tof_s);

struct RangingSample {
  DeviceId initiator{};
  DeviceId responder{};
  double t_round{};    // initiator clock, seconds
  double t_reply{};    // responder clock, seconds
  std::int64_t round_ticks{};
  std::int64_t reply_ticks{};
  double cfo_ratio{};  // estimated responder rate relative to initiator, minus one
  Distance distance{};
  bool clamped{false};
  bool valid{false};
  // True-time bookkeeping for schedule conformance checks.
  long double poll_tx_s{};
  long double response_tx_s{};
  long double response_rx_s{};
};

struct ExchangeNoise {
  double timestamp_sigma_s{0.0};
  double cfo_sigma_ppm{0.0};
  double loss_prob{0.0};
  double range_limit_m{1e300};
};

inline ExchangeNoise noise_from(const ChannelModel& ch) {
  return {ch.timestamp_noise_s, ch.cfo_noise_ppm, ch.loss_prob, ch.range_limit_m};
}

/// Simulates one poll/response exchange starting at true time `start_s`.
/// `path_length` is the propagation distance (true distance plus any NLOS bias).
RangingSample sstwr_exchange(const NodeClock& initiator, const NodeClock& responder,
                             Distance path_length, double reply_delay_s, const ExchangeNoise& channel,
                             Rng& rng, long double start_s = 0.0L);

/// Plain SS-TWR without frequency correction, for bias comparisons.
inline double uncorrected_tof(double t_round, double t_reply) { return (t_round - t_reply) / 2.0; }

}  // namespace uwbt
