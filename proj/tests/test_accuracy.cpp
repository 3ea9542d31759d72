#include <doctest.h>

#include "fixtures.hpp"
#include "uwbt/accuracy.hpp"
#include "uwbt/config.hpp"

using namespace uwbt;

namespace {

DeploymentConfig field() { return load_config(fixture::scenario("field600.cfg")); }

double mean_of(const std::vector<ErrorSample>& s) {
  double sum = 0.0;
  for (const auto& e : s) sum += e.error_2d;
  return s.empty() ? 0.0 : sum / static_cast<double>(s.size());
}

}  // namespace

TEST_CASE("column statistics") {
  const auto s = column_stats({1.0, 2.0, 3.0, 4.0});
  CHECK(s.avg == doctest::Approx(2.5));
  CHECK(s.median == doctest::Approx(2.5));
  CHECK(s.sigma == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(column_stats({7.0}).sigma == 0.0);
}

TEST_CASE("noiseless ranging gives sub-centimetre errors in both variants") {
  const auto r = run_accuracy(fixture::noiseless(field()), 3, 5);
  REQUIRE_FALSE(r.ground_truth.samples.empty());
  REQUIRE_FALSE(r.self_localized.samples.empty());
  for (const auto* v : {&r.ground_truth, &r.self_localized})
    for (const auto& e : v->samples) CHECK(e.error_2d < 1.0);
}

TEST_CASE("2D error is the hypotenuse of the axis errors") {
  const auto r = run_accuracy(field(), 2, 9);
  for (const auto& e : r.ground_truth.samples) {
    CHECK(e.error_2d == doctest::Approx(std::hypot(e.error_x, e.error_y)));
    CHECK(e.error_x >= 0.0);
    CHECK(e.error_y >= 0.0);
  }
}

TEST_CASE("doubling timestamp noise roughly doubles the error") {
  auto base = field();
  auto loud = base;
  loud.channel.timestamp_noise_s *= 2.0;
  loud.channel.cfo_noise_ppm *= 2.0;
  const double a = mean_of(run_accuracy(base, 20, 3).ground_truth.samples);
  const double b = mean_of(run_accuracy(loud, 20, 3).ground_truth.samples);
  CHECK(b / a >= 0.7 * 2.0);
  CHECK(b / a <= 1.3 * 2.0);
}

TEST_CASE("parallel trials equal the serial reference") {
  const auto c = field();
  const auto p = run_accuracy(c, 6, 11);
  const auto s = run_accuracy_serial(c, 6, 11);
  REQUIRE(p.ground_truth.samples.size() == s.ground_truth.samples.size());
  for (std::size_t i = 0; i < p.ground_truth.samples.size(); ++i) {
    CHECK(p.ground_truth.samples[i].error_2d == s.ground_truth.samples[i].error_2d);
    CHECK(p.self_localized.samples[i].estimate == s.self_localized.samples[i].estimate);
  }
  CHECK(format_accuracy(p) == format_accuracy(s));
}

TEST_CASE("a tag without a script is rejected") {
  auto c = field();
  c.tags[0].waypoints.clear();
  CHECK_THROWS_AS(run_accuracy(c, 1, 1), std::invalid_argument);
}
