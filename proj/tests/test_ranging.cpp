#include <doctest.h>

#include <cmath>

#include "uwbt/ranging.hpp"

using namespace uwbt;

namespace {

constexpr double kTickM = kSpeedOfLight * kDefaultTick;

RangingSample exchange(double d, double resp_ppm, double reply_s, const ExchangeNoise& noise = {},
                       std::uint64_t seed = 1) {
  Rng rng(seed);
  NodeClock init{0.0, 0.25, kDefaultTick};
  NodeClock resp{resp_ppm, 0.61, kDefaultTick};
  return sstwr_exchange(init, resp, Distance{d}, reply_s, noise, rng, 3.0L);
}

}  // namespace

TEST_CASE("local clock model and its inverse") {
  NodeClock c{20.0, 0.5, kDefaultTick};
  CHECK(static_cast<double>(local_reading(c, 10.0L)) == doctest::Approx(0.5 + 10.0 * (1 + 20e-6)).epsilon(1e-15));
  CHECK(static_cast<double>(true_time_of(c, local_reading(c, 7.25L))) == doctest::Approx(7.25).epsilon(1e-15));
  const double ts = local_timestamp(c, SimTime::from_seconds(1.0));
  CHECK(std::abs(ts - (0.5 + 1.0 + 20e-6)) <= kDefaultTick / 2 + 1e-15);
}

TEST_CASE("zero range with ideal clocks") {
  const auto s = exchange(0.0, 0.0, 1e-3);
  CHECK(s.valid);
  CHECK(s.t_round == doctest::Approx(1e-3).epsilon(1e-9));
  CHECK(s.t_reply == doctest::Approx(1e-3).epsilon(1e-9));
  CHECK(s.distance.meters() <= kTickM);
}

TEST_CASE("ten meters with ideal clocks") {
  const auto s = exchange(10.0, 0.0, 1e-3);
  const auto tof = cfo_corrected_tof(s.t_round, s.t_reply, s.cfo_ratio);
  CHECK(tof.tof_s == doctest::Approx(33.356e-9).epsilon(1e-3));
  CHECK(std::abs(s.distance.meters() - 10.0) <= kTickM);
}

TEST_CASE("fast responder: corrected vs uncorrected") {
  const auto s = exchange(10.0, 20.0, 2e-3);
  CHECK(std::abs(s.distance.meters() - 10.0) <= 0.01);
  const double raw = uncorrected_tof(s.t_round, s.t_reply) * kSpeedOfLight;
  CHECK(std::abs(raw - 10.0) == doctest::Approx(kSpeedOfLight * 20e-6 * 2e-3 / 2).epsilon(0.01));
}

TEST_CASE("corrected distance is strictly increasing in true distance without noise") {
  double prev = -1.0;
  for (double d = 0.5; d <= 100.0; d += 0.5) {
    const auto s = exchange(d, -13.0, 1.5e-3);
    CHECK(s.distance.meters() > prev);
    prev = s.distance.meters();
  }
}

TEST_CASE("negative estimates clamp to zero") {
  const auto e = cfo_corrected_tof(1e-3, 1e-3 + 1e-9, 0.0);
  CHECK(e.clamped);
  CHECK(e.tof_s == 0.0);
  CHECK_THROWS_AS(cfo_corrected_tof(std::nan(""), 1e-3, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(distance_from_tof(-1.0), std::invalid_argument);
}

TEST_CASE("timestamp noise gives about c*sigma per range") {
  ExchangeNoise n;
  n.timestamp_sigma_s = 0.3e-9;
  Rng rng(99);
  NodeClock a{5.0, 0.1, kDefaultTick}, b{-7.0, 0.3, kDefaultTick};
  double sum = 0.0, sum2 = 0.0;
  const int N = 20000;
  for (int i = 0; i < N; ++i) {
    const auto s = sstwr_exchange(a, b, Distance{20.0}, 1e-3, n, rng, 1.0L + i * 0.01L);
    const double e = s.distance.meters() - 20.0;
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / N;
  const double sd = std::sqrt(sum2 / N - mean * mean);
  CHECK(std::abs(mean) < 0.005);
  CHECK(sd == doctest::Approx(kSpeedOfLight * 0.3e-9).epsilon(0.05));
}

TEST_CASE("loss and range limit invalidate samples") {
  ExchangeNoise lossy;
  lossy.loss_prob = 1.0;
  CHECK_FALSE(exchange(5.0, 0.0, 1e-3, lossy).valid);
  ExchangeNoise short_range;
  short_range.range_limit_m = 4.0;
  CHECK_FALSE(exchange(5.0, 0.0, 1e-3, short_range).valid);
  CHECK(exchange(3.0, 0.0, 1e-3, short_range).valid);
}

TEST_CASE("exchanges are reproducible from the rng state") {
  ExchangeNoise n;
  n.timestamp_sigma_s = 0.3e-9;
  n.cfo_sigma_ppm = 0.1;
  const auto a = exchange(12.0, 3.0, 1e-3, n, 5);
  const auto b = exchange(12.0, 3.0, 1e-3, n, 5);
  CHECK(a.distance.meters() == b.distance.meters());
  CHECK(a.round_ticks == b.round_ticks);
}
