#include "uwbt/model.hpp"

#include <algorithm>
#include <set>

#include "uwbt/schedule.hpp"

namespace uwbt {

std::string to_string(Role role) {
  switch (role) {
    case Role::MasterAnchor: return "master";
    case Role::RelayAnchor: return "relay";
    case Role::PassiveAnchor: return "passive";
    case Role::Tag: return "tag";
  }
  return "?";
}

std::optional<Role> parse_role(const std::string& text) {
  if (text == "master") return Role::MasterAnchor;
  if (text == "relay") return Role::RelayAnchor;
  if (text == "passive") return Role::PassiveAnchor;
  if (text == "tag") return Role::Tag;
  return std::nullopt;
}

Position2D position_at(const std::vector<Waypoint>& script, double t_s) {
  if (script.empty()) return {};
  if (t_s <= script.front().t_s) return script.front().p;
  if (t_s >= script.back().t_s) return script.back().p;
  auto hi = std::upper_bound(script.begin(), script.end(), t_s,
                             [](double t, const Waypoint& w) { return t < w.t_s; });
  auto lo = std::prev(hi);
  const double span = hi->t_s - lo->t_s;
  if (span <= 0.0) return hi->p;
  const double a = (t_s - lo->t_s) / span;
  return {lo->p.x + a * (hi->p.x - lo->p.x), lo->p.y + a * (hi->p.y - lo->p.y)};
}

double ChannelModel::nlos_bias(DeviceId a, DeviceId b) const {
  for (const auto& link : nlos) {
    if ((link.a == a && link.b == b) || (link.a == b && link.b == a)) return link.bias_m;
  }
  return 0.0;
}

FrameAnchors DeploymentConfig::frame_anchors() const {
  if (frame) return *frame;
  auto ids = anchor_ids();
  FrameAnchors f{};
  if (ids.size() > 0) f.origin = ids[0];
  if (ids.size() > 1) f.x_axis = ids[1];
  if (ids.size() > 2) f.orientation = ids[2];
  return f;
}

std::vector<DeviceId> DeploymentConfig::anchor_ids() const {
  std::vector<DeviceId> ids;
  for (const auto& a : anchors) ids.push_back(a.node.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<DeviceId> DeploymentConfig::tag_ids() const {
  std::vector<DeviceId> ids;
  for (const auto& t : tags) ids.push_back(t.node.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

const AnchorSpec* DeploymentConfig::find_anchor(DeviceId id) const {
  for (const auto& a : anchors)
    if (a.node.id == id) return &a;
  return nullptr;
}

const TagSpec* DeploymentConfig::find_tag(DeviceId id) const {
  for (const auto& t : tags)
    if (t.node.id == id) return &t;
  return nullptr;
}

double exchange_budget_s(const DeploymentConfig& config) { return config.reply_delay_s + 1e-3; }

namespace {

std::string fmt_ms(double ms) {
  auto s = std::to_string(ms / 1000.0);
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

std::vector<std::string> validate(const DeploymentConfig& config) {
  std::vector<std::string> v;

  if (config.anchors.empty()) {
    v.emplace_back("anchors: need >=1 anchor");
  } else if (config.anchors.size() < 3) {
    v.emplace_back("anchors: need ≥3 for 2D");
  }

  std::size_t masters = 0;
  std::set<DeviceId> ids;
  for (const auto& a : config.anchors) {
    if (a.node.role == Role::Tag) v.emplace_back("anchors: id " + std::to_string(a.node.id) + " has tag role");
    if (a.node.role == Role::MasterAnchor) ++masters;
    if (!ids.insert(a.node.id).second)
      v.emplace_back("anchors: duplicate id " + std::to_string(a.node.id));
    if (!a.position.finite())
      v.emplace_back("anchors: non-finite position for id " + std::to_string(a.node.id));
    for (const auto& m : a.moves)
      if (!m.to.finite() || !std::isfinite(m.at_s))
        v.emplace_back("anchors: non-finite move for id " + std::to_string(a.node.id));
    if (a.clock_ppm && std::abs(*a.clock_ppm) > config.drift_bound_ppm)
      v.emplace_back("anchors: clock_ppm of id " + std::to_string(a.node.id) + " exceeds drift bound");
  }
  if (!config.anchors.empty() && masters != 1)
    v.emplace_back("anchors: exactly one master required, found " + std::to_string(masters));

  if (config.tags.empty()) v.emplace_back("tags: need >=1 tag");
  for (const auto& t : config.tags) {
    if (t.node.role != Role::Tag) v.emplace_back("tags: id " + std::to_string(t.node.id) + " lacks tag role");
    if (!ids.insert(t.node.id).second) v.emplace_back("tags: duplicate id " + std::to_string(t.node.id));
    if (t.waypoints.empty()) v.emplace_back("tags: id " + std::to_string(t.node.id) + " has no waypoints");
    double last = -1e300;
    for (const auto& w : t.waypoints) {
      if (!w.p.finite() || !std::isfinite(w.t_s))
        v.emplace_back("tags: non-finite waypoint for id " + std::to_string(t.node.id));
      if (w.t_s < last) v.emplace_back("tags: waypoints of id " + std::to_string(t.node.id) + " not time-sorted");
      last = w.t_s;
    }
    if (t.clock_ppm && std::abs(*t.clock_ppm) > config.drift_bound_ppm)
      v.emplace_back("tags: clock_ppm of id " + std::to_string(t.node.id) + " exceeds drift bound");
  }

  const double period = config.localization_period_s;
  if (!(period > 0.0)) {
    v.emplace_back("localization_period: must be > 0");
  } else if (!config.anchors.empty() && !config.tags.empty()) {
    const auto active = active_phase_ms(config.anchors.size(), config.tags.size());
    if (period * 1000.0 < static_cast<double>(active)) {
      v.emplace_back("localization_period: period < active phase " + fmt_ms(static_cast<double>(active)) + " s");
    } else if (period < static_cast<double>(active) / 1000.0 + config.uplink.airtime_s) {
      v.emplace_back("localization_period: period < active phase + uplink airtime");
    }
  }

  const auto& ch = config.channel;
  if (!(ch.range_limit_m > 0.0)) v.emplace_back("channel.range_limit_m: must be > 0");
  if (!(ch.loss_prob >= 0.0 && ch.loss_prob <= 1.0)) v.emplace_back("channel.loss_prob: must be in [0,1]");
  if (!(ch.timestamp_noise_s >= 0.0)) v.emplace_back("channel.timestamp_noise: must be >= 0");
  if (!(ch.cfo_noise_ppm >= 0.0)) v.emplace_back("channel.cfo_noise_ppm: must be >= 0");
  for (const auto& l : ch.nlos)
    if (!std::isfinite(l.bias_m) || l.bias_m < 0.0) v.emplace_back("channel.nlos: bias must be finite and >= 0");

  if (!(config.drift_bound_ppm >= 0.0)) v.emplace_back("drift_bound_ppm: must be >= 0");
  if (!(config.phase_spread_s >= 0.0)) v.emplace_back("clock.phase_spread_s: must be >= 0");
  if (!(config.reply_delay_s > 0.0)) v.emplace_back("ranging.reply_delay: must be > 0");

  // Per-exchange budget: 1 ms lead-in, one exchange per peer, 1 ms tail.
  const double budget = exchange_budget_s(config);
  const double anchor_need = 2e-3 + budget * static_cast<double>(config.anchors.size() > 0 ? config.anchors.size() - 1 : 0);
  const double tag_need = 2e-3 + budget * static_cast<double>(config.anchors.size());
  if (anchor_need > kSelfLocSlotMs * 1e-3)
    v.emplace_back("ranging.reply_delay: anchor exchanges exceed the 200 ms self-localization slot");
  if (tag_need > kTagSlotMs * 1e-3)
    v.emplace_back("ranging.reply_delay: tag exchanges exceed the 100 ms tag slot");

  if (!config.anchors.empty()) {
    const auto f = config.frame_anchors();
    std::set<DeviceId> anchor_set;
    for (const auto& a : config.anchors) anchor_set.insert(a.node.id);
    if (config.anchors.size() >= 3) {
      if (!anchor_set.count(f.origin) || !anchor_set.count(f.x_axis) || !anchor_set.count(f.orientation))
        v.emplace_back("frame: origin/x_axis/orientation must name anchors");
      else if (f.origin == f.x_axis || f.origin == f.orientation || f.x_axis == f.orientation)
        v.emplace_back("frame: origin/x_axis/orientation must be distinct");
    }
  }

  if (!(config.sync.wake_guard_ms >= 0.0)) v.emplace_back("sync.wake_guard_ms: must be >= 0");
  if (!(config.sync.relay_offset_ms > 0.0)) v.emplace_back("sync.relay_offset_ms: must be > 0");
  if (!(config.sync.tolerance_ms > 0.0)) v.emplace_back("sync.tolerance_ms: must be > 0");
  if (!(config.uplink.airtime_s > 0.0)) v.emplace_back("uplink.airtime_s: must be > 0");
  if (!(config.collector.displacement_threshold_m > 0.0))
    v.emplace_back("collector.displacement_threshold_m: must be > 0");
  if (config.collector.window < 5) v.emplace_back("collector.window: must be >= 5 periods");

  return v;
}

}  // namespace uwbt
