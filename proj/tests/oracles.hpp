#pragma once

// Test-side reference computations. None of these call into the library's
// numerical code, so agreement with it is evidence rather than tautology.

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "uwbt/model.hpp"
#include "uwbt/solver.hpp"

namespace oracle {

// Table of measured powers (mW) and canonical durations (s), typed in directly.
inline constexpr double kSleepMw = 0.04366;
inline constexpr double kTransceiverOnMw = 140.93;
inline constexpr double kSelfLocMw = 40.55;
inline constexpr double kTagLocMw = 52.32;
inline constexpr double kLoraTxMw = 67.82;
inline constexpr double kTransceiverOnS = 3.74;
inline constexpr double kSelfLocS = 0.156;
inline constexpr double kTagLocS = 0.063;
inline constexpr double kLoraTxS = 4.17;

inline double anchor_avg_mw(double period_s, bool lora) {
  double active = kTransceiverOnS + kSelfLocS + (lora ? kLoraTxS : 0.0);
  double e = kTransceiverOnMw * kTransceiverOnS + kSelfLocMw * kSelfLocS + (lora ? kLoraTxMw * kLoraTxS : 0.0);
  return (e + kSleepMw * (period_s - active)) / period_s;
}

inline double tag_avg_mw(double period_s) {
  double active = kTagLocS + kLoraTxS;
  return (kTagLocMw * kTagLocS + kLoraTxMw * kLoraTxS + kSleepMw * (period_s - active)) / period_s;
}

inline double lifetime_days(double mah, double volts, double mw) { return mah * volts / mw / 24.0; }

inline double cost(const uwbt::RangeSet& rs, double x, double y) {
  double s = 0.0;
  for (const auto& e : rs) {
    const double r = std::hypot(x - e.anchor.x, y - e.anchor.y) - e.d;
    s += r * r;
  }
  return s;
}

/// Two-stage brute force: 1 cm grid over [lo, hi], then a 0.1 mm grid over
/// +-2 cm around the coarse minimum.
inline uwbt::Position2D grid_search(const uwbt::RangeSet& rs, uwbt::Position2D lo, uwbt::Position2D hi) {
  auto scan = [&](uwbt::Position2D a, uwbt::Position2D b, double step) {
    uwbt::Position2D best = a;
    double best_c = std::numeric_limits<double>::infinity();
    const long nx = std::lround((b.x - a.x) / step), ny = std::lround((b.y - a.y) / step);
    for (long i = 0; i <= nx; ++i)
      for (long j = 0; j <= ny; ++j) {
        const double x = a.x + step * i, y = a.y + step * j;
        const double c = cost(rs, x, y);
        if (c < best_c) {
          best_c = c;
          best = {x, y};
        }
      }
    return best;
  };
  const auto coarse = scan(lo, hi, 0.01);
  return scan({coarse.x - 0.02, coarse.y - 0.02}, {coarse.x + 0.02, coarse.y + 0.02}, 1e-4);
}

/// Maps true coordinates into the gauge where `o` is the origin, `x` lies on +x and `w` has y > 0.
struct Gauge {
  uwbt::Position2D o;
  double ux, uy;  // unit vector towards the x-axis anchor
  double flip;

  Gauge(uwbt::Position2D origin, uwbt::Position2D xa, uwbt::Position2D orient) : o(origin) {
    const double dx = xa.x - o.x, dy = xa.y - o.y, n = std::hypot(dx, dy);
    ux = dx / n;
    uy = dy / n;
    const double v = -uy * (orient.x - o.x) + ux * (orient.y - o.y);
    flip = v < 0 ? -1.0 : 1.0;
  }
  uwbt::Position2D operator()(uwbt::Position2D p) const {
    const double dx = p.x - o.x, dy = p.y - o.y;
    return {ux * dx + uy * dy, flip * (-uy * dx + ux * dy)};
  }
};

/// Random layout with pairwise spacing >= min_sep and the first three anchors
/// forming a well-conditioned triangle.
inline std::vector<uwbt::Position2D> random_layout(std::mt19937_64& rng, std::size_t n, double size = 30.0,
                                                   double min_sep = 2.0) {
  std::uniform_real_distribution<double> u(0.0, size);
  for (;;) {
    std::vector<uwbt::Position2D> ps;
    int guard = 0;
    while (ps.size() < n && guard++ < 10000) {
      uwbt::Position2D p{u(rng), u(rng)};
      bool ok = true;
      for (const auto& q : ps) ok = ok && uwbt::distance(p, q) >= min_sep;
      if (ok) ps.push_back(p);
    }
    if (ps.size() < n) continue;
    const double ax = ps[1].x - ps[0].x, ay = ps[1].y - ps[0].y;
    const double bx = ps[2].x - ps[0].x, by = ps[2].y - ps[0].y;
    const double area2 = std::abs(ax * by - ay * bx);
    if (area2 / (std::hypot(ax, ay) * std::hypot(bx, by)) < 0.2) continue;
    return ps;
  }
}

}  // namespace oracle
