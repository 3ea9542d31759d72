#include "uwbt/selfloc.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace uwbt {

DistanceMatrix::DistanceMatrix(std::vector<DeviceId> ids) : ids_(std::move(ids)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  sum_.assign(ids_.size() * ids_.size(), 0.0);
  count_.assign(ids_.size() * ids_.size(), 0);
}

std::optional<std::size_t> DistanceMatrix::index_of(DeviceId id) const {
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

void DistanceMatrix::add_measurement(DeviceId from, DeviceId to, double d) {
  const auto i = index_of(from);
  const auto j = index_of(to);
  if (!i || !j || *i == *j || !std::isfinite(d) || d < 0.0) return;
  sum_[*i * size() + *j] += d;
  count_[*i * size() + *j] += 1;
}

void DistanceMatrix::set_directed(std::size_t i, std::size_t j, std::optional<double> d) {
  if (i == j) return;
  sum_[i * size() + j] = d.value_or(0.0);
  count_[i * size() + j] = d ? 1 : 0;
}

std::optional<double> DistanceMatrix::directed(std::size_t i, std::size_t j) const {
  const auto k = i * size() + j;
  if (i == j || count_[k] == 0) return std::nullopt;
  return sum_[k] / count_[k];
}

std::optional<double> DistanceMatrix::at(std::size_t i, std::size_t j) const {
  const auto a = directed(i, j);
  const auto b = directed(j, i);
  if (a && b) return (*a + *b) / 2.0;
  return a ? a : b;
}

std::optional<double> DistanceMatrix::between(DeviceId a, DeviceId b) const {
  const auto i = index_of(a);
  const auto j = index_of(b);
  if (!i || !j) return std::nullopt;
  return at(*i, *j);
}

DistanceMatrix DistanceMatrix::from_positions(const std::map<DeviceId, Position2D>& positions) {
  std::vector<DeviceId> ids;
  for (const auto& [id, p] : positions) ids.push_back(id);
  DistanceMatrix dm(ids);
  for (const auto& [a, pa] : positions)
    for (const auto& [b, pb] : positions)
      if (a != b) dm.add_measurement(a, b, distance(pa, pb));
  return dm;
}

AnchorFrame fix_frame(const DistanceMatrix& dm, DeviceId origin_id, DeviceId x_axis_id, DeviceId orientation_id,
                      double triangle_slack_m) {
  const auto d01 = dm.between(origin_id, x_axis_id);
  const auto d02 = dm.between(origin_id, orientation_id);
  const auto d12 = dm.between(x_axis_id, orientation_id);
  if (!d01 || !d02 || !d12) throw FrameError("fix_frame: missing distance among frame anchors");
  if (!(*d01 > 0.0)) throw FrameError("fix_frame: origin and x-axis anchors coincide");

  const double a = *d01, b = *d02, c = *d12;
  if (c > a + b + triangle_slack_m || a > b + c + triangle_slack_m || b > a + c + triangle_slack_m)
    throw FrameError("fix_frame: frame distances violate the triangle inequality");

  const double x2 = (a * a + b * b - c * c) / (2.0 * a);
  const double y2 = std::sqrt(std::max(0.0, b * b - x2 * x2));

  AnchorFrame f;
  f.origin_id = origin_id;
  f.x_axis_id = x_axis_id;
  f.orientation_id = orientation_id;
  f.positions[origin_id] = {0.0, 0.0};
  f.positions[x_axis_id] = {a, 0.0};
  f.positions[orientation_id] = {x2, y2};
  f.degenerate = y2 <= 1e-6 * a;
  return f;
}

namespace {

struct Pair {
  DeviceId a, b;
  double d;
};

std::vector<Pair> measured_pairs(const DistanceMatrix& dm, const std::map<DeviceId, Position2D>& placed) {
  std::vector<Pair> pairs;
  const auto& ids = dm.ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!placed.count(ids[i])) continue;
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      if (!placed.count(ids[j])) continue;
      if (auto d = dm.at(i, j)) pairs.push_back({ids[i], ids[j], *d});
    }
  }
  return pairs;
}

double pair_cost(const std::vector<Pair>& pairs, const std::map<DeviceId, Position2D>& pos) {
  double c = 0.0;
  for (const auto& pr : pairs) {
    const double r = distance(pos.at(pr.a), pos.at(pr.b)) - pr.d;
    c += r * r;
  }
  return c;
}

// Joint LM over all placed anchors; origin fixed, x-axis anchor constrained to y = 0.
std::optional<std::map<DeviceId, Position2D>> refine(const std::vector<Pair>& pairs,
                                                      const std::map<DeviceId, Position2D>& start,
                                                      const AnchorFrame& gauge, const SelfLocOptions& opts) {
  struct Slot {
    Eigen::Index x{-1}, y{-1};
  };
  std::map<DeviceId, Slot> slots;
  Eigen::Index n_params = 0;
  for (const auto& [id, p] : start) {
    Slot s;
    if (id == gauge.origin_id) {
    } else if (id == gauge.x_axis_id) {
      s.x = n_params++;
    } else {
      s.x = n_params++;
      s.y = n_params++;
    }
    slots[id] = s;
  }
  if (n_params == 0 || pairs.empty()) return start;

  auto pos = start;
  auto apply = [&](const Eigen::VectorXd& step) {
    auto out = pos;
    for (auto& [id, p] : out) {
      const auto& s = slots[id];
      if (s.x >= 0) p.x += step(s.x);
      if (s.y >= 0) p.y += step(s.y);
    }
    return out;
  };

  const auto m = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd J(m, n_params);
  Eigen::VectorXd r(m);
  double cost = pair_cost(pairs, pos);
  double lambda = opts.solver.lambda_initial;

  for (int it = 0; it < opts.refine_max_iterations; ++it) {
    J.setZero();
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto& pr = pairs[static_cast<std::size_t>(k)];
      const auto& pa = pos.at(pr.a);
      const auto& pb = pos.at(pr.b);
      const double dx = pa.x - pb.x, dy = pa.y - pb.y;
      const double norm = std::hypot(dx, dy);
      r(k) = norm - pr.d;
      if (norm <= 0.0) continue;
      const auto& sa = slots[pr.a];
      const auto& sb = slots[pr.b];
      if (sa.x >= 0) J(k, sa.x) += dx / norm;
      if (sa.y >= 0) J(k, sa.y) += dy / norm;
      if (sb.x >= 0) J(k, sb.x) -= dx / norm;
      if (sb.y >= 0) J(k, sb.y) -= dy / norm;
    }
    Eigen::MatrixXd H = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    for (Eigen::Index i = 0; i < n_params; ++i) H(i, i) = H(i, i) * (1.0 + lambda) + 1e-12;
    const Eigen::VectorXd step = -H.ldlt().solve(g);
    if (!step.allFinite()) return std::nullopt;
    auto cand = apply(step);
    const double cand_cost = pair_cost(pairs, cand);
    if (cand_cost <= cost) {
      pos = std::move(cand);
      cost = cand_cost;
      lambda *= opts.solver.lambda_decrease;
    } else {
      lambda *= opts.solver.lambda_increase;
    }
    if (step.norm() < opts.solver.step_tolerance_m) break;
  }

  if (!std::isfinite(cost)) return std::nullopt;
  if (!(pos.at(gauge.x_axis_id).x > 0.0)) return std::nullopt;
  if (!(pos.at(gauge.orientation_id).y > 0.0) && !gauge.degenerate) return std::nullopt;
  return pos;
}

}  // namespace

AnchorFrame estimate_all(const DistanceMatrix& dm, const AnchorFrame& frame, const SelfLocOptions& opts) {
  AnchorFrame out = frame;
  out.unplaced.clear();
  out.refinement_failed = false;

  std::vector<DeviceId> pending;
  for (auto id : dm.ids())
    if (!out.positions.count(id)) pending.push_back(id);

  // Ascending-id passes until no further anchor can be placed.
  bool progress = true;
  while (progress && !pending.empty()) {
    progress = false;
    for (auto it = pending.begin(); it != pending.end();) {
      RangeSet rs;
      for (const auto& [id, p] : out.positions)
        if (auto d = dm.between(*it, id)) rs.push_back({p, *d});
      if (rs.size() >= 3) {
        out.positions[*it] = trilaterate(rs, std::nullopt, opts.solver).p;
        it = pending.erase(it);
        progress = true;
      } else {
        ++it;
      }
    }
  }
  out.unplaced = pending;

  const auto pairs = measured_pairs(dm, out.positions);
  if (auto refined = refine(pairs, out.positions, out, opts)) {
    out.positions = std::move(*refined);
  } else {
    out.refinement_failed = true;
  }
  out.rms_residual = pairs.empty() ? 0.0 : std::sqrt(pair_cost(pairs, out.positions) / static_cast<double>(pairs.size()));
  return out;
}

namespace {

std::optional<double> median(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

}  // namespace

std::set<DeviceId> detect_displacement(std::span<const DistanceMatrix> history, double threshold_m,
                                       std::size_t recent) {
  std::set<DeviceId> flagged;
  if (history.size() < 5 || recent == 0 || recent >= history.size()) return flagged;

  const auto& ids = history.back().ids();
  const std::size_t split = history.size() - recent;
  std::map<DeviceId, int> shifted;

  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      std::vector<double> older, newer;
      for (std::size_t k = 0; k < history.size(); ++k) {
        if (auto d = history[k].between(ids[i], ids[j])) (k < split ? older : newer).push_back(*d);
      }
      const auto m_old = median(std::move(older));
      const auto m_new = median(std::move(newer));
      if (m_old && m_new && std::abs(*m_new - *m_old) > threshold_m) {
        ++shifted[ids[i]];
        ++shifted[ids[j]];
      }
    }
  }
  for (const auto& [id, n] : shifted)
    if (n >= 2) flagged.insert(id);
  return flagged;
}

GaugeTransform::GaugeTransform(Position2D origin, Position2D x_axis, Position2D orientation) : origin_(origin) {
  const double dx = x_axis.x - origin.x, dy = x_axis.y - origin.y;
  const double len = std::hypot(dx, dy);
  if (!(len > 0.0)) throw FrameError("GaugeTransform: origin and x-axis anchors coincide");
  cos_ = dx / len;
  sin_ = dy / len;
  flip_ = 1.0;
  if (apply(orientation).y < 0.0) flip_ = -1.0;
}

Position2D GaugeTransform::apply(Position2D p) const {
  const double tx = p.x - origin_.x, ty = p.y - origin_.y;
  return {cos_ * tx + sin_ * ty, flip_ * (-sin_ * tx + cos_ * ty)};
}

}  // namespace uwbt
