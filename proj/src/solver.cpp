#include "uwbt/solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace uwbt {

std::string to_string(FixCondition c) {
  switch (c) {
    case FixCondition::Ok: return "ok";
    case FixCondition::NearCollinear: return "near_collinear";
    case FixCondition::MaxIterations: return "max_iterations";
  }
  return "?";
}

namespace {

// Singular values of an n x 2 matrix, descending.
Eigen::Vector2d singular_values(const Eigen::MatrixX2d& m) {
  Eigen::JacobiSVD<Eigen::MatrixX2d> svd(m);
  return svd.singularValues();
}

bool ill_conditioned(const Eigen::Vector2d& sv, double ratio) {
  return sv(0) <= 0.0 || sv(1) < ratio * sv(0);
}

Eigen::MatrixX2d anchor_spread(std::span<const RangeEntry> rs) {
  Eigen::MatrixX2d a(static_cast<Eigen::Index>(rs.size() - 1), 2);
  for (std::size_t i = 1; i < rs.size(); ++i) {
    a(static_cast<Eigen::Index>(i - 1), 0) = rs[i].anchor.x - rs[0].anchor.x;
    a(static_cast<Eigen::Index>(i - 1), 1) = rs[i].anchor.y - rs[0].anchor.y;
  }
  return a;
}

void check_entries(std::span<const RangeEntry> rs) {
  if (rs.size() < 3) throw SolveError("need at least 3 ranges for a 2D fix, got " + std::to_string(rs.size()));
  for (const auto& e : rs) {
    if (!e.anchor.finite() || !std::isfinite(e.d) || e.d < 0.0)
      throw SolveError("range entries must be finite with d >= 0");
  }
}

}  // namespace

double range_cost(std::span<const RangeEntry> rs, Position2D p) {
  double cost = 0.0;
  for (const auto& e : rs) {
    const double r = distance(p, e.anchor) - e.d;
    cost += r * r;
  }
  return cost;
}

Position2D linear_init(std::span<const RangeEntry> rs, double collinear_ratio) {
  check_entries(rs);
  const auto& a1 = rs[0].anchor;
  const double k1 = a1.x * a1.x + a1.y * a1.y;
  const double d1 = rs[0].d;

  Eigen::MatrixX2d A = 2.0 * anchor_spread(rs);
  Eigen::VectorXd b(A.rows());
  for (std::size_t i = 1; i < rs.size(); ++i) {
    const auto& ai = rs[i].anchor;
    b(static_cast<Eigen::Index>(i - 1)) = (ai.x * ai.x + ai.y * ai.y - k1) - (rs[i].d * rs[i].d - d1 * d1);
  }

  const auto sv = singular_values(A);
  if (sv(0) <= 0.0) throw InitError("linear_init: all anchors coincide", a1);
  if (ill_conditioned(sv, collinear_ratio)) {
    // Project onto the dominant anchor direction and solve the 1D problem there.
    Eigen::JacobiSVD<Eigen::MatrixX2d> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Vector2d dir = svd.matrixV().col(0);
    const Eigen::Vector2d origin(a1.x, a1.y);
    const Eigen::VectorXd Ad = A * dir;
    const double s = Ad.dot(b - A * origin) / Ad.squaredNorm();
    throw InitError("linear_init: anchors are near collinear", {a1.x + s * dir(0), a1.y + s * dir(1)});
  }

  const Eigen::Vector2d p = A.colPivHouseholderQr().solve(b);
  return {p(0), p(1)};
}

Fix2D trilaterate(std::span<const RangeEntry> rs, std::optional<Position2D> init, const SolverOptions& opts) {
  check_entries(rs);

  bool collinear_anchors = false;
  Position2D p;
  if (init) {
    p = *init;
  } else {
    try {
      p = linear_init(rs, opts.collinear_ratio);
    } catch (const InitError& e) {
      collinear_anchors = true;
      p = e.best_on_line();
      // The line is a saddle of the cost; step off it to one of the two mirror solutions.
      const auto& a0 = rs[0].anchor;
      const auto far = std::max_element(rs.begin(), rs.end(), [&](const RangeEntry& x, const RangeEntry& y) {
        return distance(x.anchor, a0) < distance(y.anchor, a0);
      });
      const double len = distance(far->anchor, a0);
      const double h2 = rs[0].d * rs[0].d - distance(p, a0) * distance(p, a0);
      if (len > 0.0 && h2 > 0.0) {
        const double h = std::sqrt(h2);
        p = {p.x - h * (far->anchor.y - a0.y) / len, p.y + h * (far->anchor.x - a0.x) / len};
      }
    }
  }
  if (!collinear_anchors && init) collinear_anchors = ill_conditioned(singular_values(anchor_spread(rs)), opts.collinear_ratio);

  const auto n = static_cast<Eigen::Index>(rs.size());
  Eigen::MatrixX2d J(n, 2);
  Eigen::VectorXd r(n);

  auto linearize = [&](Position2D at) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& e = rs[static_cast<std::size_t>(i)];
      const double dx = at.x - e.anchor.x;
      const double dy = at.y - e.anchor.y;
      const double norm = std::hypot(dx, dy);
      r(i) = norm - e.d;
      if (norm > 0.0) {
        J(i, 0) = dx / norm;
        J(i, 1) = dy / norm;
      } else {
        J(i, 0) = 0.0;
        J(i, 1) = 0.0;
      }
    }
  };

  double cost = range_cost(rs, p);
  double lambda = opts.lambda_initial;
  bool converged = false;
  int it = 0;
  while (it < opts.max_iterations) {
    ++it;
    linearize(p);
    Eigen::Matrix2d H = J.transpose() * J;
    const Eigen::Vector2d g = J.transpose() * r;
    H(0, 0) = H(0, 0) * (1.0 + lambda) + 1e-12;
    H(1, 1) = H(1, 1) * (1.0 + lambda) + 1e-12;
    const Eigen::Vector2d step = -H.ldlt().solve(g);
    if (!step.allFinite()) {
      lambda *= opts.lambda_increase;
      continue;
    }
    const Position2D cand{p.x + step(0), p.y + step(1)};
    const double cand_cost = range_cost(rs, cand);
    const double step_norm = step.norm();
    if (cand_cost <= cost) {
      p = cand;
      cost = cand_cost;
      lambda *= opts.lambda_decrease;
      if (step_norm < opts.step_tolerance_m) {
        converged = true;
        break;
      }
    } else {
      lambda *= opts.lambda_increase;
      // A rejected step this small means we are at the floating-point floor of the minimum.
      if (step_norm < opts.step_tolerance_m) {
        converged = true;
        break;
      }
    }
  }

  Fix2D fix;
  fix.p = p;
  fix.iterations = it;
  fix.rms_residual = std::sqrt(cost / static_cast<double>(rs.size()));
  if (!converged) {
    fix.condition = FixCondition::MaxIterations;
  } else {
    linearize(p);
    if (collinear_anchors || ill_conditioned(singular_values(J), opts.collinear_ratio))
      fix.condition = FixCondition::NearCollinear;
  }
  return fix;
}

ResidualStats residual_stats(const Fix2D& fix, std::span<const RangeEntry> rs) {
  ResidualStats st;
  st.residuals.reserve(rs.size());
  double sum = 0.0, sum_abs = 0.0;
  for (const auto& e : rs) {
    const double r = distance(fix.p, e.anchor) - e.d;
    st.residuals.push_back(r);
    sum += r;
    sum_abs += std::abs(r);
    st.max_abs = std::max(st.max_abs, std::abs(r));
  }
  if (!rs.empty()) {
    st.mean = sum / static_cast<double>(rs.size());
    st.mean_abs = sum_abs / static_cast<double>(rs.size());
  }
  return st;
}

namespace {

std::optional<Fix2D> solve_one(const RangeSet& rs, const SolverOptions& opts) {
  if (rs.size() < 3) return std::nullopt;
  return trilaterate(rs, std::nullopt, opts);
}

}  // namespace

std::vector<std::optional<Fix2D>> solve_batch_serial(std::span<const RangeSet> batch, const SolverOptions& opts) {
  std::vector<std::optional<Fix2D>> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out[i] = solve_one(batch[i], opts);
  return out;
}

std::vector<std::optional<Fix2D>> solve_batch(std::span<const RangeSet> batch, const SolverOptions& opts) {
  std::vector<std::optional<Fix2D>> out(batch.size());
  const auto n = static_cast<std::ptrdiff_t>(batch.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = solve_one(batch[static_cast<std::size_t>(i)], opts);
  return out;
}

}  // namespace uwbt
