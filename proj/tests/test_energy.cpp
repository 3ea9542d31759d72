#include <doctest.h>

#include "oracles.hpp"
#include "uwbt/energy.hpp"

using namespace uwbt;

TEST_CASE("canonical traces reproduce the hand sums") {
  for (double period : {10.0, 40.0}) {
    CHECK(average_power(canonical_anchor_trace(period, true)) ==
          doctest::Approx(oracle::anchor_avg_mw(period, true)).epsilon(1e-12));
    CHECK(average_power(canonical_anchor_trace(period, false)) ==
          doctest::Approx(oracle::anchor_avg_mw(period, false)).epsilon(1e-12));
    CHECK(average_power(canonical_tag_trace(period)) == doctest::Approx(oracle::tag_avg_mw(period)).epsilon(1e-12));
  }
}

TEST_CASE("rescaling a 10 s trace to 40 s") {
  const auto a = scale_period(canonical_anchor_trace(10.0), 40.0);
  CHECK(average_power(a) == doctest::Approx(20.44).epsilon(0.005));
  const auto t = scale_period(canonical_tag_trace(10.0), 40.0);
  CHECK(average_power(t) == doctest::Approx(7.19).epsilon(0.005));
}

TEST_CASE("average power is non-increasing in the period") {
  double prev = 1e9;
  for (double p = 9.0; p <= 120.0; p += 1.0) {
    const double a = average_power(canonical_anchor_trace(p));
    CHECK(a <= prev);
    prev = a;
  }
}

TEST_CASE("lifetime times average power equals battery energy") {
  const Battery b{2600, 3.7};
  for (double mw : {1.0, 13.38, 20.44, 500.0}) CHECK(battery_lifetime_hours(b, mw) * mw == doctest::Approx(b.energy_mwh()));
  CHECK(battery_lifetime_hours({1000, 3.7}, 1000.0) == doctest::Approx(3.7));
  CHECK(battery_lifetime_days({2600, 3.7}, 13.38) == doctest::Approx(oracle::lifetime_days(2600, 3.7, 13.38)));
}

TEST_CASE("segments longer than the period are rejected") {
  StateTrace t;
  t.period_s = 1.0;
  t.segments = {{PowerState::LoraTx, 4.17}};
  CHECK_THROWS_AS(average_power(t), TraceError);
}

TEST_CASE("trace from activity resolves overlaps by priority") {
  const std::vector<ActivityInterval> act{
      {PowerState::AnchorTransceiverOn, SimTime::from_ms(0), SimTime::from_ms(4000)},
      {PowerState::AnchorSelfLoc, SimTime::from_ms(600), SimTime::from_ms(800)},
      {PowerState::LoraTx, SimTime::from_ms(3900), SimTime::from_ms(8070)},
      {PowerState::AnchorTransceiverOn, SimTime::from_ms(39000), SimTime::from_ms(41000)},
  };
  const auto t = trace_from_simulation(1, act, SimTime::from_ms(0), SimTime::from_ms(40000));
  CHECK(t.period_s == doctest::Approx(40.0));
  CHECK(t.duration_of(PowerState::AnchorSelfLoc) == doctest::Approx(0.2));
  CHECK(t.duration_of(PowerState::LoraTx) == doctest::Approx(4.17));
  CHECK(t.duration_of(PowerState::AnchorTransceiverOn) == doctest::Approx(3.7 + 1.0));
  double total = 0.0;
  for (const auto& s : t.segments) total += s.duration_s;
  CHECK(total == doctest::Approx(40.0));
}

TEST_CASE("power state names round trip") {
  for (auto s : {PowerState::Sleep, PowerState::AnchorTransceiverOn, PowerState::AnchorSelfLoc,
                 PowerState::TagLocalization, PowerState::LoraTx})
    CHECK(parse_power_state(to_string(s)) == s);
  CHECK_FALSE(parse_power_state("warp").has_value());
}
