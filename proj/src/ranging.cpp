#include "uwbt/ranging.hpp"

#include <cmath>
#include <stdexcept>

namespace uwbt {

long double local_reading(const NodeClock& clock, long double true_s) {
  return static_cast<long double>(clock.phase_offset_s) + clock.rate() * true_s;
}

long double true_time_of(const NodeClock& clock, long double local_s) {
  return (local_s - static_cast<long double>(clock.phase_offset_s)) / clock.rate();
}

std::int64_t local_ticks(const NodeClock& clock, long double true_s) {
  return std::llroundl(local_reading(clock, true_s) / static_cast<long double>(clock.tick_s));
}

double local_timestamp(const NodeClock& clock, SimTime true_time) {
  const long double t = static_cast<long double>(true_time.ns) * 1e-9L;
  return static_cast<double>(static_cast<long double>(local_ticks(clock, t)) * clock.tick_s);
}

TofEstimate cfo_corrected_tof(double t_round, double t_reply, double cfo_ratio) {
  if (!std::isfinite(t_round) || !std::isfinite(t_reply) || !std::isfinite(cfo_ratio))
    throw std::invalid_argument("cfo_corrected_tof: non-finite input");
  if (cfo_ratio <= -1.0) throw std::invalid_argument("cfo_corrected_tof: cfo_ratio <= -1");
  const double tof = (t_round - t_reply / (1.0 + cfo_ratio)) / 2.0;
  if (tof < 0.0) return {0.0, true};
  return {tof, false};
}

Distance distance_from_tof(double tof_s) {
  if (!std::isfinite(tof_s) || tof_s < 0.0) throw std::invalid_argument("distance_from_tof: tof must be >= 0");
  return Distance{kSpeedOfLight * tof_s};
}

RangingSample sstwr_exchange(const NodeClock& initiator, const NodeClock& responder,
                             Distance path_length, double reply_delay_s, const ExchangeNoise& channel,
                             Rng& rng, long double start_s) {
  if (!(reply_delay_s > 0.0)) throw std::invalid_argument("sstwr_exchange: reply_delay must be > 0");

  RangingSample s;
  const long double tof = static_cast<long double>(path_length.meters()) / kSpeedOfLight;

  std::normal_distribution<double> ts_noise(0.0, 1.0);
  std::bernoulli_distribution lost(channel.loss_prob);
  auto jitter = [&]() -> long double {
    return channel.timestamp_sigma_s > 0.0 ? channel.timestamp_sigma_s * ts_noise(rng) : 0.0;
  };

  // Fixed draw order keeps the RNG stream independent of the loss outcome.
  const long double n_poll_tx = jitter();
  const long double n_poll_rx = jitter();
  const long double n_resp_tx = jitter();
  const long double n_resp_rx = jitter();
  const double cfo_noise = channel.cfo_sigma_ppm > 0.0 ? channel.cfo_sigma_ppm * 1e-6 * ts_noise(rng) : 0.0;
  const bool poll_lost = lost(rng);
  const bool resp_lost = lost(rng);

  const long double tick_i = initiator.tick_s;
  const long double tick_r = responder.tick_s;

  // Poll: initiator timestamps its transmission, responder its reception.
  const long double poll_tx = start_s;
  const std::int64_t i1 = std::llroundl((local_reading(initiator, poll_tx) + n_poll_tx * initiator.rate()) / tick_i);
  const std::int64_t r1 = std::llroundl((local_reading(responder, poll_tx + tof) + n_poll_rx * responder.rate()) / tick_r);

  // Response is scheduled reply_delay after reception, on the responder's clock.
  const std::int64_t reply_ticks = std::llroundl(static_cast<long double>(reply_delay_s) / tick_r);
  const std::int64_t r2 = r1 + reply_ticks;
  const long double resp_tx = true_time_of(responder, static_cast<long double>(r2) * tick_r) + n_resp_tx;
  const long double resp_rx = resp_tx + tof;
  const std::int64_t i2 = std::llroundl((local_reading(initiator, resp_rx) + n_resp_rx * initiator.rate()) / tick_i);

  s.poll_tx_s = poll_tx;
  s.response_tx_s = resp_tx;
  s.response_rx_s = resp_rx;
  s.round_ticks = i2 - i1;
  s.reply_ticks = r2 - r1;
  s.t_round = static_cast<double>(static_cast<long double>(s.round_ticks) * tick_i);
  s.t_reply = static_cast<double>(static_cast<long double>(s.reply_ticks) * tick_r);
  s.cfo_ratio = static_cast<double>(responder.rate() / initiator.rate() - 1.0L) + cfo_noise;

  const bool out_of_range = path_length.meters() > channel.range_limit_m;
  s.valid = !(poll_lost || resp_lost || out_of_range);
  if (!s.valid) return s;

  const auto est = cfo_corrected_tof(s.t_round, s.t_reply, s.cfo_ratio);
  s.distance = distance_from_tof(est.tof_s);
  s.clamped = est.clamped;
  return s;
}

}  // namespace uwbt
