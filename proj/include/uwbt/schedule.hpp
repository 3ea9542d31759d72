#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "uwbt/model.hpp"

namespace uwbt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Active-phase layout constants, milliseconds.
inline constexpr std::int64_t kSyncWindowMs = 400;
inline constexpr std::int64_t kSecondSyncOffsetMs = 200;
inline constexpr std::int64_t kSelfLocSlotMs = 200;
inline constexpr std::int64_t kTagSlotMs = 100;
inline constexpr std::int64_t kGuardMs = 400;
inline constexpr std::int64_t kFinalSyncMs = 100;

enum class SlotKind : std::uint8_t { SyncA, AnchorSelfLoc, TagLoc, Guard, SyncD };

std::string to_string(SlotKind kind);

struct SlotWindow {
  std::optional<DeviceId> owner;  // empty for sync and guard windows
  std::int64_t start_ms{};
  std::int64_t duration_ms{};
  SlotKind kind{SlotKind::Guard};

  std::int64_t end_ms() const { return start_ms + duration_ms; }
};

struct Schedule {
  std::vector<SlotWindow> windows;
  std::int64_t active_ms{};
  double period_s{};

  const SlotWindow* slot_of(DeviceId owner) const;
  const SlotWindow& window(SlotKind kind) const;  // first window of that kind
  std::int64_t final_sync_ms() const { return active_ms - kFinalSyncMs; }
};

std::int64_t active_phase_ms(std::size_t n_anchors, std::size_t n_tags);

/// Slots are assigned in ascending id order; ids need not be contiguous.
Schedule build_schedule(std::span<const DeviceId> anchor_ids, std::span<const DeviceId> tag_ids,
                        double period_s);
/// Index-owned variant: anchors own 0..n_anchors-1, tags own n_anchors.. onward.
Schedule build_schedule(std::size_t n_anchors, std::size_t n_tags, double period_s);

// ---------------------------------------------------------------------------
// Synchronization

enum class SyncLabel : std::uint8_t { S1 = 1, S2 = 2, S3 = 3 };
enum class SyncStatus : std::uint8_t { Unsynced, Synced, Verified };

std::string to_string(SyncStatus status);

/// On-air sync message: label (1 byte), hop count (1 byte), master id (2 bytes, big-endian).
struct SyncMessage {
  SyncLabel label{SyncLabel::S1};
  std::uint8_t hop{0};
  DeviceId master{};

  std::array<std::uint8_t, 4> encode() const;
  static std::optional<SyncMessage> decode(std::span<const std::uint8_t> bytes);
  friend bool operator==(const SyncMessage&, const SyncMessage&) = default;
};

/// Offset of a label's nominal transmission from the active-phase origin.
double label_offset_s(SyncLabel label, std::int64_t active_ms);

struct SyncParams {
  std::int64_t active_ms{3900};
  double tolerance_s{5e-3};
  double relay_offset_s{10e-3};
};

struct SyncState {
  SyncStatus status{SyncStatus::Unsynced};
  double phase_correction{0.0};             // last origin adjustment, seconds
  std::optional<SyncLabel> last_sync_label;  // within the current period
  std::optional<double> origin_local;        // local time of active-phase start
  bool heard_this_period{false};
  std::uint32_t anomalies{0};
};

struct SyncReception {
  SyncMessage msg;
  double rx_local{};
};
struct SyncTimeout {};
using SyncEvent = std::variant<SyncReception, SyncTimeout>;

struct SyncStepResult {
  SyncState state;
  double timer_adjustment{0.0};  // seconds added to the node's local schedule origin
};

/// Advances a node's sync state machine. Anomalies are counted, never thrown.
SyncStepResult sync_step(const SyncState& state, const SyncEvent& event, const SyncParams& params);

/// Called at each period wake-up: Verified demotes to Synced and per-period bookkeeping resets.
SyncState begin_period(const SyncState& state, double period_s);

struct RelayState {
  std::array<bool, 4> relayed{};  // indexed by label value
};

struct Retransmission {
  SyncMessage msg;
  double delay_s{};  // after reception, on the relay's local clock
};

/// At-most-once retransmission per label and period; hop count incremented.
std::optional<Retransmission> relay_behavior(RelayState& state, const SyncMessage& msg,
                                             const SyncParams& params);

struct WakeParams {
  double wake_guard_s{20e-3};
  double drift_bound_ppm{20.0};
};

double wake_margin_s(double period_s, const WakeParams& params);

/// Local time to wake for the next period's SyncA, or nullopt when the node must listen continuously.
std::optional<double> wakeup_time(const Schedule& schedule, const SyncState& state,
                                  const WakeParams& params);

}  // namespace uwbt
