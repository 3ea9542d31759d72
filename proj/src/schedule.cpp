#include "uwbt/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace uwbt {

std::string to_string(SlotKind kind) {
  switch (kind) {
    case SlotKind::SyncA: return "SyncA";
    case SlotKind::AnchorSelfLoc: return "AnchorSelfLoc";
    case SlotKind::TagLoc: return "TagLoc";
    case SlotKind::Guard: return "Guard";
    case SlotKind::SyncD: return "SyncD";
  }
  return "?";
}

std::string to_string(SyncStatus status) {
  switch (status) {
    case SyncStatus::Unsynced: return "unsynced";
    case SyncStatus::Synced: return "synced";
    case SyncStatus::Verified: return "verified";
  }
  return "?";
}

const SlotWindow* Schedule::slot_of(DeviceId owner) const {
  for (const auto& w : windows)
    if (w.owner && *w.owner == owner) return &w;
  return nullptr;
}

const SlotWindow& Schedule::window(SlotKind kind) const {
  for (const auto& w : windows)
    if (w.kind == kind) return w;
  throw std::out_of_range("schedule has no window of kind " + to_string(kind));
}

std::int64_t active_phase_ms(std::size_t n_anchors, std::size_t n_tags) {
  return kSyncWindowMs + kSelfLocSlotMs * static_cast<std::int64_t>(n_anchors) +
         kTagSlotMs * static_cast<std::int64_t>(n_tags) + kGuardMs + kFinalSyncMs;
}

Schedule build_schedule(std::span<const DeviceId> anchor_ids, std::span<const DeviceId> tag_ids,
                        double period_s) {
  if (anchor_ids.size() < 3) throw ConfigError("schedule: need at least 3 anchors");
  if (tag_ids.empty()) throw ConfigError("schedule: need at least 1 tag");

  Schedule s;
  s.active_ms = active_phase_ms(anchor_ids.size(), tag_ids.size());
  s.period_s = period_s;
  if (period_s * 1000.0 < static_cast<double>(s.active_ms))
    throw ConfigError("schedule: period " + std::to_string(period_s) + " s shorter than active phase " +
                      std::to_string(s.active_ms) + " ms");

  std::vector<DeviceId> anchors(anchor_ids.begin(), anchor_ids.end());
  std::vector<DeviceId> tags(tag_ids.begin(), tag_ids.end());
  std::sort(anchors.begin(), anchors.end());
  std::sort(tags.begin(), tags.end());

  std::int64_t t = 0;
  s.windows.push_back({std::nullopt, t, kSyncWindowMs, SlotKind::SyncA});
  t += kSyncWindowMs;
  for (auto id : anchors) {
    s.windows.push_back({id, t, kSelfLocSlotMs, SlotKind::AnchorSelfLoc});
    t += kSelfLocSlotMs;
  }
  for (auto id : tags) {
    s.windows.push_back({id, t, kTagSlotMs, SlotKind::TagLoc});
    t += kTagSlotMs;
  }
  s.windows.push_back({std::nullopt, t, kGuardMs, SlotKind::Guard});
  t += kGuardMs;
  s.windows.push_back({std::nullopt, t, kFinalSyncMs, SlotKind::SyncD});
  return s;
}

Schedule build_schedule(std::size_t n_anchors, std::size_t n_tags, double period_s) {
  std::vector<DeviceId> a(n_anchors), t(n_tags);
  for (std::size_t i = 0; i < n_anchors; ++i) a[i] = static_cast<DeviceId>(i);
  for (std::size_t j = 0; j < n_tags; ++j) t[j] = static_cast<DeviceId>(n_anchors + j);
  return build_schedule(a, t, period_s);
}

std::array<std::uint8_t, 4> SyncMessage::encode() const {
  return {static_cast<std::uint8_t>(label), hop, static_cast<std::uint8_t>(master >> 8),
          static_cast<std::uint8_t>(master & 0xFF)};
}

std::optional<SyncMessage> SyncMessage::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != 4 || bytes[0] < 1 || bytes[0] > 3) return std::nullopt;
  return SyncMessage{static_cast<SyncLabel>(bytes[0]), bytes[1],
                     static_cast<DeviceId>((bytes[2] << 8) | bytes[3])};
}

double label_offset_s(SyncLabel label, std::int64_t active_ms) {
  switch (label) {
    case SyncLabel::S1: return 0.0;
    case SyncLabel::S2: return kSecondSyncOffsetMs * 1e-3;
    case SyncLabel::S3: return static_cast<double>(active_ms - kFinalSyncMs) * 1e-3;
  }
  return 0.0;
}

namespace {

SyncStepResult anomaly(SyncState s) {
  ++s.anomalies;
  return {s, 0.0};
}

SyncStepResult adopt(SyncState s, double origin, SyncLabel label, SyncStatus status) {
  const double adj = s.origin_local ? origin - *s.origin_local : 0.0;
  s.origin_local = origin;
  s.phase_correction = adj;
  s.status = status;
  s.last_sync_label = label;
  s.heard_this_period = true;
  return {s, adj};
}

}  // namespace

SyncStepResult sync_step(const SyncState& state, const SyncEvent& event, const SyncParams& params) {
  if (std::holds_alternative<SyncTimeout>(event)) {
    SyncState s = state;
    if (!s.heard_this_period) s.status = SyncStatus::Unsynced;
    return {s, 0.0};
  }

  const auto& rx = std::get<SyncReception>(event);
  const SyncLabel label = rx.msg.label;
  const double candidate = rx.rx_local - label_offset_s(label, params.active_ms) -
                           static_cast<double>(rx.msg.hop) * params.relay_offset_s;

  // Labels must arrive in strictly increasing order within a period.
  if (state.last_sync_label && static_cast<int>(label) <= static_cast<int>(*state.last_sync_label))
    return anomaly(state);

  if (label == SyncLabel::S1) return adopt(state, candidate, label, SyncStatus::Synced);

  if (state.last_sync_label) {
    // Second message this period: verify alignment against the origin set by the first.
    if (state.origin_local && std::abs(candidate - *state.origin_local) <= params.tolerance_s) {
      SyncState s = state;
      s.status = SyncStatus::Verified;
      s.last_sync_label = label;
      s.phase_correction = 0.0;
      return {s, 0.0};
    }
    auto r = adopt(state, candidate, label, SyncStatus::Synced);
    ++r.state.anomalies;
    return r;
  }

  // First message heard this period was S2 or S3: derive the origin from its label offset.
  return adopt(state, candidate, label, SyncStatus::Synced);
}

SyncState begin_period(const SyncState& state, double period_s) {
  SyncState s = state;
  if (s.status == SyncStatus::Verified) s.status = SyncStatus::Synced;
  s.last_sync_label.reset();
  s.heard_this_period = false;
  s.phase_correction = 0.0;
  if (s.origin_local) *s.origin_local += period_s;
  return s;
}

std::optional<Retransmission> relay_behavior(RelayState& state, const SyncMessage& msg,
                                             const SyncParams& params) {
  auto& done = state.relayed[static_cast<std::size_t>(msg.label)];
  if (done || msg.hop == 0xFF) return std::nullopt;
  done = true;
  SyncMessage out = msg;
  out.hop = static_cast<std::uint8_t>(msg.hop + 1);
  return Retransmission{out, params.relay_offset_s};
}

double wake_margin_s(double period_s, const WakeParams& params) {
  return std::max(params.wake_guard_s, params.drift_bound_ppm * 1e-6 * period_s);
}

std::optional<double> wakeup_time(const Schedule& schedule, const SyncState& state,
                                  const WakeParams& params) {
  if (state.status == SyncStatus::Unsynced || !state.origin_local) return std::nullopt;
  return *state.origin_local + schedule.period_s - wake_margin_s(schedule.period_s, params);
}

}  // namespace uwbt
