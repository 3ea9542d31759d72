#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "uwbt/solver.hpp"

using namespace uwbt;

namespace {

RangeSet exact(const std::vector<Position2D>& anchors, Position2D p) {
  RangeSet rs;
  for (const auto& a : anchors) rs.push_back({a, distance(a, p)});
  return rs;
}

}  // namespace

TEST_CASE("square of anchors, exact ranges") {
  const std::vector<Position2D> a{{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  const auto fix = trilaterate(exact(a, {3, 4}));
  CHECK(fix.p.x == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(fix.p.y == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(fix.rms_residual < 1e-9);
  CHECK(fix.condition == FixCondition::Ok);
}

TEST_CASE("linear init is exact for consistent input") {
  const std::vector<Position2D> a{{0, 0}, {20, 0}, {5, 15}};
  const auto p = linear_init(exact(a, {7.5, 3.25}));
  CHECK(p.x == doctest::Approx(7.5));
  CHECK(p.y == doctest::Approx(3.25));
}

TEST_CASE("collinear anchors are flagged") {
  const std::vector<Position2D> a{{0, 0}, {5, 0}, {10, 0}};
  const auto rs = exact(a, {4, 3});
  CHECK_THROWS_AS(linear_init(rs), InitError);
  const auto fix = trilaterate(rs);
  CHECK(fix.condition == FixCondition::NearCollinear);
  CHECK(std::abs(fix.p.y) == doctest::Approx(3.0).epsilon(1e-6));
}

TEST_CASE("fewer than three ranges is an error") {
  RangeSet rs{{{0, 0}, 1.0}, {{1, 0}, 1.0}};
  CHECK_THROWS_AS(trilaterate(rs), SolveError);
}

TEST_CASE("residual statistics") {
  const std::vector<Position2D> a{{0, 0}, {10, 0}, {0, 10}};
  auto rs = exact(a, {2, 2});
  rs[0].d += 0.3;
  const auto fix = trilaterate(rs);
  const auto st = residual_stats(fix, rs);
  CHECK(st.residuals.size() == 3);
  CHECK(st.max_abs >= st.mean_abs);
  CHECK(fix.rms_residual == doctest::Approx(std::sqrt(range_cost(rs, fix.p) / 3)));
}

TEST_CASE("matches the brute-force grid oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> count(4, 8);
  std::uniform_real_distribution<double> ux(0.0, 12.0), uy(0.0, 12.0);
  for (int k = 0; k < 30; ++k) {
    const double sigma = std::array<double, 3>{0.0, 0.05, 0.15}[k % 3];
    std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma : 1.0);
    std::vector<Position2D> anchors;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) anchors.push_back({ux(rng), uy(rng)});
    const Position2D truth{2 + ux(rng) * 2 / 3, 2 + uy(rng) * 2 / 3};
    RangeSet rs;
    for (const auto& a : anchors) rs.push_back({a, std::max(0.0, distance(a, truth) + (sigma > 0 ? noise(rng) : 0.0))});
    const auto fix = trilaterate(rs);
    if (fix.condition == FixCondition::NearCollinear) continue;
    const auto g = oracle::grid_search(rs, {-1, -1}, {13, 13});
    CAPTURE(k);
    CHECK(distance(fix.p, g) <= 2e-3);
  }
}

TEST_CASE("parallel batch equals the serial reference bit for bit") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 30.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<RangeSet> batch(500);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Position2D t{u(rng), u(rng)};
    const std::size_t n = 2 + i % 6;  // includes unsolvable two-range instances
    for (std::size_t k = 0; k < n; ++k) {
      const Position2D a{u(rng), u(rng)};
      batch[i].push_back({a, std::max(0.0, distance(a, t) + noise(rng))});
    }
  }
  const auto s = solve_batch_serial(batch);
  const auto p = solve_batch(batch);
  REQUIRE(s.size() == p.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    REQUIRE(s[i].has_value() == p[i].has_value());
    if (!s[i]) continue;
    CHECK(s[i]->p.x == p[i]->p.x);
    CHECK(s[i]->p.y == p[i]->p.y);
    CHECK(s[i]->iterations == p[i]->iterations);
  }
  CHECK_FALSE(s[0].has_value());  // two entries
}
